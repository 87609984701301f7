#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "groundrl/output_parser.hpp"
#include "groundrl/reward.hpp"
#include "groundrl/toy_task.hpp"

using namespace groundrl;

namespace {

std::vector<GroundingInstance> synthetic() { return {synthetic_instance()}; }

}  // namespace

TEST_CASE("canonical target decodes to the perfect completion") {
  const auto data = synthetic();
  for (ToyWorld world : {ToyWorld::Chunks, ToyWorld::TwoCompletion}) {
    const ToyTask task(data, world);
    const auto target = task.canonical_target(data[0]);
    const std::string text = task.vocabulary().decode(target);
    CHECK(std::abs(total_reward(text, data[0], RewardConfig{}).r_total - 2.275) < 1e-12);
    CHECK(total_reward(task.vocabulary().decode(task.refusal_target()), data[0],
                       RewardConfig{}).r_total == 0.0);
    for (const auto& seq : task.best_completions(data[0])) {
      CHECK(total_reward(task.vocabulary().decode(seq), data[0], RewardConfig{}).r_total ==
            doctest::Approx(2.275));
    }
  }
}

TEST_CASE("two-completion world has two answers") {
  const auto data = synthetic();
  const ToyTask task(data, ToyWorld::TwoCompletion);
  CHECK(task.vocabulary().size() == 3);
  CHECK(task.best_completions(data[0]).size() == 1);
  CHECK(parse_toy_world("two-completion") == ToyWorld::TwoCompletion);
  CHECK_FALSE(parse_toy_world("words").has_value());
}

TEST_CASE("base policy prefers grammatical continuations") {
  const auto data = synthetic();
  const ToyTask task(data);
  const auto base = task.base_policy(2.0);
  const auto target = task.canonical_target(data[0]);
  const auto uniform = ToyPolicy(task.vocabulary(), task.max_length());
  CHECK(base.sequence_log_prob(target) > uniform.sequence_log_prob(target));
}

TEST_CASE("stage II with zero steps returns the SFT policy") {
  const auto data = synthetic();
  auto cfg = ToyTrainingConfig::two_stage();
  cfg.grpo.steps = 0;
  const auto zero = train_two_stage(data, cfg);
  auto sft_cfg = ToyTrainingConfig::two_stage();
  sft_cfg.run_grpo = false;
  const auto sft = train_two_stage(data, sft_cfg);
  CHECK(zero.policy == sft.policy);
  CHECK(zero.policy == zero.reference);
  CHECK(zero.trace.size() == cfg.sft_steps);
}

TEST_CASE("grpo-only mode skips the cold start") {
  const auto data = synthetic();
  auto cfg = ToyTrainingConfig::grpo_only();
  cfg.grpo.steps = 5;
  CHECK(cfg.reward.lambda1 == doctest::Approx(0.5));
  CHECK(cfg.reward.lambda2 == doctest::Approx(0.5));
  const auto r = train_two_stage(data, cfg);
  REQUIRE(r.trace.size() == 5);
  for (const auto& rec : r.trace) CHECK(rec.stage == TrainingRecord::Stage::Grpo);
  CHECK(r.reference == ToyTask(data).base_policy(cfg.prior_strength));
}

TEST_CASE("training is reproducible and the trace is written as csv") {
  const auto data = synthetic();
  auto cfg = ToyTrainingConfig::two_stage();
  cfg.grpo.steps = 4;
  cfg.seed = 3;
  const auto a = train_two_stage(data, cfg);
  const auto b = train_two_stage(data, cfg);
  CHECK(a.policy == b.policy);
  std::ostringstream out;
  write_trace_csv(out, a.trace);
  const std::string csv = out.str();
  CHECK(csv.rfind("stage,step,mean_reward,r_fmt_mean,r_ent_mean,r_rel_mean,kl,loss,p_best\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 10 + 4);
  CHECK_THROWS_AS(train_two_stage({}, cfg), std::invalid_argument);
}

TEST_CASE("two-stage training raises the top completion's probability") {
  const auto data = synthetic();
  auto cfg = ToyTrainingConfig::two_stage();
  cfg.world = ToyWorld::TwoCompletion;
  cfg.seed = 1;
  const auto r = train_two_stage(data, cfg);
  CHECK(r.trace.back().p_best > 0.9);
  CHECK(steps_to_threshold(r.trace, 0.9) > 0);
}
