#include "groundrl/toy_task.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include "groundrl/batch.hpp"
#include "groundrl/dataset.hpp"
#include "groundrl/output_parser.hpp"

namespace groundrl {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kSeparator = ", ";
constexpr std::string_view kStop = "<eos>";

std::string entity_token(EntityRole role, const BoundingBox& box) {
  const Entity e{role, box};
  return serialize_answer(std::span<const Entity>(&e, 1));
}

EntityRole other_role(EntityRole role) {
  return role == EntityRole::Subject ? EntityRole::Object : EntityRole::Subject;
}

BoundingBox mirrored(const BoundingBox& b, int width) {
  return BoundingBox(width - b.x2(), b.y1(), width - b.x1(), b.y2());
}

std::string think_body(const GroundingInstance& instance) {
  if (instance.cot()) {
    if (auto body = cot_body(*instance.cot())) return *body;
  }
  return std::string(kPlaceholderThink);
}

std::string whole_completion(const GroundingInstance& instance) {
  return canonical_completion(think_body(instance), instance.entities());
}

std::vector<const GroundingInstance*> training_pool(
    std::span<const GroundingInstance> dataset) {
  std::vector<const GroundingInstance*> pool;
  for (const auto& instance : dataset) {
    if (instance.split() == Split::Train) pool.push_back(&instance);
  }
  if (pool.empty()) {
    for (const auto& instance : dataset) pool.push_back(&instance);
  }
  return pool;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage, std::uint64_t step) {
  auto rng = make_stream_rng(seed, (stage << 40) | step);
  return rng();
}

TrainingRecord monitor_group(const ToyPolicy& policy, const GroundingInstance& instance,
                             const ToyTrainingConfig& config, std::uint64_t seed) {
  const auto group = sample_group(policy, config.grpo.group_size, seed);
  std::vector<ScoreRequest> requests;
  for (const auto& c : group) requests.push_back({&instance, c.text});
  const auto scores = score_batch(requests, config.reward);
  TrainingRecord record;
  for (const auto& s : scores) {
    record.mean_reward += s.r_total;
    record.r_fmt_mean += s.r_fmt;
    record.r_ent_mean += s.r_ent;
    record.r_rel_mean += s.r_rel;
  }
  const double n = static_cast<double>(scores.size());
  record.mean_reward /= n;
  record.r_fmt_mean /= n;
  record.r_ent_mean /= n;
  record.r_rel_mean /= n;
  return record;
}

}  // namespace

std::string_view toy_world_name(ToyWorld world) {
  return world == ToyWorld::Chunks ? "chunks" : "two-completion";
}

std::optional<ToyWorld> parse_toy_world(std::string_view text) {
  if (text == "chunks") return ToyWorld::Chunks;
  if (text == "two-completion") return ToyWorld::TwoCompletion;
  return std::nullopt;
}

ToyTask::ToyTask(std::span<const GroundingInstance> instances, ToyWorld world)
    : world_(world), vocabulary_({std::string(kStop)}, 0) {
  if (instances.empty()) throw std::invalid_argument("toy task needs instances");

  if (world_ == ToyWorld::TwoCompletion) {
    std::vector<std::string> tokens = {std::string(kStop), std::string(kRefusalToken)};
    for (const auto& instance : instances) {
      auto text = whole_completion(instance);
      if (std::find(tokens.begin(), tokens.end(), text) == tokens.end()) {
        tokens.push_back(std::move(text));
      }
    }
    vocabulary_ = Vocabulary(tokens, 0);
    for (std::size_t i = 2; i < tokens.size(); ++i) {
      completion_symbols_.push_back(static_cast<Symbol>(i));
    }
    max_length_ = 2;
    return;
  }

  std::vector<std::string> tokens = {
      std::string(kStop),       std::string(kThinkOpen),   std::string(kThinkClose),
      std::string(kAnswerOpen), std::string(kAnswerClose), std::string(kSeparator),
      std::string(kRefusalToken)};
  std::set<std::string> seen(tokens.begin(), tokens.end());
  auto add = [&](std::string token) {
    if (seen.insert(token).second) tokens.push_back(std::move(token));
  };

  std::vector<std::string> think_tokens;
  std::vector<std::string> entity_tokens;
  auto add_think = [&](std::string token) {
    if (!seen.contains(token)) think_tokens.push_back(token);
    add(std::move(token));
  };
  auto add_entity = [&](std::string token) {
    if (!seen.contains(token)) entity_tokens.push_back(token);
    add(std::move(token));
  };

  add_think(std::string(kPlaceholderThink));
  for (const auto& instance : instances) add_think(think_body(instance));
  for (const auto& instance : instances) {
    for (const Entity& e : instance.entities()) {
      add_entity(entity_token(e.role, e.bbox));
      add_entity(entity_token(other_role(e.role), e.bbox));
      add_entity(entity_token(e.role, mirrored(e.bbox, instance.image_width())));
    }
  }

  vocabulary_ = Vocabulary(tokens, 0);
  for (const auto& t : think_tokens) think_symbols_.push_back(vocabulary_.find(t));
  for (const auto& t : entity_tokens) entity_symbols_.push_back(vocabulary_.find(t));

  std::size_t longest = 0;
  for (const auto& instance : instances) {
    longest = std::max(longest, canonical_target(instance).size());
  }
  max_length_ = longest + 2;
}

std::vector<Symbol> ToyTask::canonical_target(const GroundingInstance& instance) const {
  if (world_ == ToyWorld::TwoCompletion) {
    return {vocabulary_.find(whole_completion(instance)), vocabulary_.stop()};
  }
  std::vector<Symbol> out;
  out.push_back(vocabulary_.find(kThinkOpen));
  out.push_back(vocabulary_.find(think_body(instance)));
  out.push_back(vocabulary_.find(kThinkClose));
  out.push_back(vocabulary_.find(kAnswerOpen));
  const auto& entities = instance.entities();
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (i > 0) out.push_back(vocabulary_.find(kSeparator));
    out.push_back(vocabulary_.find(entity_token(entities[i].role, entities[i].bbox)));
  }
  out.push_back(vocabulary_.find(kAnswerClose));
  out.push_back(vocabulary_.stop());
  return out;
}

std::vector<std::vector<Symbol>> ToyTask::best_completions(
    const GroundingInstance& instance) const {
  if (world_ == ToyWorld::TwoCompletion) return {canonical_target(instance)};
  const auto& entities = instance.entities();
  std::vector<std::size_t> order(entities.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const bool permute = entities.size() <= kMaxPermutedEntities;

  std::vector<std::vector<Symbol>> out;
  for (Symbol body : think_symbols_) {
    do {
      std::vector<Symbol> seq = {vocabulary_.find(kThinkOpen), body,
                                 vocabulary_.find(kThinkClose), vocabulary_.find(kAnswerOpen)};
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (i > 0) seq.push_back(vocabulary_.find(kSeparator));
        const Entity& e = entities[order[i]];
        seq.push_back(vocabulary_.find(entity_token(e.role, e.bbox)));
      }
      seq.push_back(vocabulary_.find(kAnswerClose));
      seq.push_back(vocabulary_.stop());
      out.push_back(std::move(seq));
    } while (permute && std::next_permutation(order.begin(), order.end()));
  }
  return out;
}

std::vector<Symbol> ToyTask::refusal_target() const {
  return {vocabulary_.find(kRefusalToken), vocabulary_.stop()};
}

ToyPolicy ToyTask::base_policy(double prior_strength) const {
  ToyPolicy policy(vocabulary_, max_length_);
  const Symbol refusal = vocabulary_.find(kRefusalToken);
  const Symbol stop = vocabulary_.stop();

  std::map<std::size_t, std::vector<Symbol>> successors;
  if (world_ == ToyWorld::TwoCompletion) {
    successors[policy.begin_context()] = completion_symbols_;
    successors[policy.begin_context()].push_back(refusal);
    for (Symbol s : completion_symbols_) successors[s] = {stop};
  } else {
    const Symbol think_open = vocabulary_.find(kThinkOpen);
    const Symbol think_close = vocabulary_.find(kThinkClose);
    const Symbol answer_open = vocabulary_.find(kAnswerOpen);
    const Symbol answer_close = vocabulary_.find(kAnswerClose);
    const Symbol separator = vocabulary_.find(kSeparator);
    successors[policy.begin_context()] = {think_open, refusal};
    successors[think_open] = think_symbols_;
    for (Symbol s : think_symbols_) successors[s] = {think_close};
    successors[think_close] = {answer_open};
    successors[answer_open] = entity_symbols_;
    successors[answer_open].push_back(answer_close);
    for (Symbol s : entity_symbols_) successors[s] = {separator, answer_close};
    successors[separator] = entity_symbols_;
    successors[answer_close] = {stop};
  }
  successors[refusal] = {stop};

  for (const auto& [context, next] : successors) {
    for (std::size_t pos = 0; pos < max_length_; ++pos) {
      auto row = policy.logits(context, pos);
      for (Symbol s : next) row[s] += prior_strength;
    }
  }
  return policy;
}

GroundingInstance synthetic_instance() {
  return GroundingInstance(
      "synthetic#0", "synthetic", 100, 100,
      "the small tank to the upper left of the large tank",
      {{EntityRole::Subject, BoundingBox(10, 10, 40, 40)},
       {EntityRole::Object, BoundingBox(60, 55, 95, 90)}},
      std::string("<think>Two tanks are visible; the subject is the one up and "
                  "to the left of the other.</think>"),
      Split::Train);
}

ToyTrainingConfig ToyTrainingConfig::two_stage() {
  ToyTrainingConfig config;
  config.grpo.learning_rate = 2.0;
  config.grpo.steps = 200;
  return config;
}

ToyTrainingConfig ToyTrainingConfig::grpo_only() {
  ToyTrainingConfig config = two_stage();
  config.run_sft = false;
  config.reward = RewardConfig::grpo_only();
  return config;
}

LossAndGradient sft_batch_loss(const ToyPolicy& policy,
                               std::span<const std::vector<Symbol>> targets) {
  if (targets.empty()) throw std::invalid_argument("no SFT targets");
  LossAndGradient out;
  out.gradient.assign(policy.parameter_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(targets.size());
  for (const auto& target : targets) {
    const auto lg = sft_loss(policy, target);
    out.loss += scale * lg.loss;
    for (std::size_t k = 0; k < lg.gradient.size(); ++k) {
      out.gradient[k] += scale * lg.gradient[k];
    }
  }
  return out;
}

ToyTrainingResult train_two_stage(std::span<const GroundingInstance> dataset,
                                  const ToyTrainingConfig& config) {
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  config.reward.validate();
  config.grpo.validate();

  const ToyTask task(dataset, config.world);
  const auto pool = training_pool(dataset);
  ToyPolicy policy = task.base_policy(config.prior_strength);
  TrainingTrace trace;

  if (config.run_sft) {
    std::vector<const GroundingInstance*> sft_pool;
    for (const auto* instance : pool) {
      if (instance->cot()) sft_pool.push_back(instance);
    }
    if (sft_pool.empty()) sft_pool = pool;
    std::vector<std::vector<Symbol>> targets;
    for (const auto* instance : sft_pool) targets.push_back(task.canonical_target(*instance));

    for (std::size_t step = 1; step <= config.sft_steps; ++step) {
      const auto lg = sft_batch_loss(policy, targets);
      auto params = policy.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        params[k] -= config.sft_learning_rate * lg.gradient[k];
      }
      const std::size_t which = (step - 1) % sft_pool.size();
      TrainingRecord record =
          monitor_group(policy, *sft_pool[which], config, derive_seed(config.seed, 1, step));
      record.stage = TrainingRecord::Stage::Sft;
      record.step = step;
      record.loss = lg.loss;
      for (const auto& seq : task.best_completions(*sft_pool[which])) {
        record.p_best += std::exp(policy.sequence_log_prob(seq));
      }
      trace.push_back(record);
    }
  }

  const ToyPolicy reference = policy;
  if (config.run_grpo) {
    for (std::size_t step = 1; step <= config.grpo.steps; ++step) {
      const GroundingInstance& instance = *pool[(step - 1) % pool.size()];
      const ToyPolicy old_policy = policy;
      const auto best = task.best_completions(instance);
      auto result = grpo_step(policy, reference, old_policy, instance, config.grpo,
                              config.reward, derive_seed(config.seed, 2, step), best);
      policy = std::move(result.policy);
      result.record.step = step;
      trace.push_back(result.record);
    }
  }
  return {std::move(policy), reference, std::move(trace)};
}

std::size_t steps_to_threshold(const TrainingTrace& trace, double threshold) {
  for (const auto& record : trace) {
    if (record.stage == TrainingRecord::Stage::Grpo && record.p_best > threshold) {
      return record.step;
    }
  }
  return 0;
}

void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
  out << "stage,step,mean_reward,r_fmt_mean,r_ent_mean,r_rel_mean,kl,loss,p_best\n";
  const auto old_precision = out.precision(10);
  for (const auto& r : trace) {
    out << (r.stage == TrainingRecord::Stage::Sft ? "sft" : "grpo") << ',' << r.step
        << ',' << r.mean_reward << ',' << r.r_fmt_mean << ',' << r.r_ent_mean << ','
        << r.r_rel_mean << ',' << r.kl << ',' << r.loss << ',' << r.p_best << '\n';
  }
  out.precision(old_precision);
}

}  // namespace groundrl
