#include "groundrl/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "groundrl/batch.hpp"

namespace groundrl {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;

void require_same_shape(const ToyPolicy& a, const ToyPolicy& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("policies differ in vocabulary or max_length");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (!(clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be > 0");
  if (!(kl_beta >= 0.0)) throw std::invalid_argument("kl_beta must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(advantage_epsilon >= 0.0)) {
    throw std::invalid_argument("advantage_epsilon must be >= 0");
  }
}

LossAndGradient sft_loss(const ToyPolicy& policy, std::span<const Symbol> target) {
  policy.check_sequence(target);
  LossAndGradient out;
  out.gradient.assign(policy.parameter_count(), 0.0);
  const auto contexts = sequence_contexts(policy, target);
  for (std::size_t t = 0; t < target.size(); ++t) {
    const auto logp = policy.log_probabilities(contexts[t], t);
    out.loss -= logp[target[t]];
    // d(-log p_y)/dz_k = p_k - [k == y]
    const std::size_t base = policy.row_offset(contexts[t], t);
    for (std::size_t k = 0; k < logp.size(); ++k) {
      out.gradient[base + k] += std::exp(logp[k]);
    }
    out.gradient[base + target[t]] -= 1.0;
  }
  return out;
}

std::vector<double> group_advantages(std::span<const double> rewards,
                                     double advantage_epsilon) {
  if (rewards.size() < 2) throw std::invalid_argument("group needs >= 2 rewards");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std_dev = std::sqrt(var / n);
  std::vector<double> out(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out[i] = (rewards[i] - mean) / (std_dev + advantage_epsilon);
  }
  // Equal rewards carry no signal; rounding in the mean must not invent one.
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) std::fill(out.begin(), out.end(), 0.0);
  return out;
}

double clipped_term(double ratio, double advantage, double clip_epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distribution size mismatch");
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) kl += p[k] * (std::log(p[k]) - std::log(q[k]));
  }
  return kl;
}

double kl_divergence(const ToyPolicy& policy, const ToyPolicy& reference,
                     std::span<const std::vector<Symbol>> sequences) {
  require_same_shape(policy, reference);
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : sequences) {
    const auto contexts = sequence_contexts(policy, seq);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      total += categorical_kl(policy.probabilities(contexts[t], t),
                              reference.probabilities(contexts[t], t));
      ++tokens;
    }
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

GrpoLoss grpo_loss(const ToyPolicy& policy, const ToyPolicy& old_policy,
                   const ToyPolicy& reference,
                   std::span<const std::vector<Symbol>> samples,
                   std::span<const double> advantages, const GrpoConfig& config) {
  require_same_shape(policy, old_policy);
  require_same_shape(policy, reference);
  if (samples.size() != advantages.size() || samples.empty()) {
    throw std::invalid_argument("need one advantage per sample");
  }

  GrpoLoss out;
  out.gradient.assign(policy.parameter_count(), 0.0);
  const double eps = config.clip_epsilon;
  const double inv_group = 1.0 / static_cast<double>(samples.size());

  std::size_t total_tokens = 0;
  for (const auto& seq : samples) total_tokens += seq.size();
  const double inv_tokens = 1.0 / static_cast<double>(total_tokens);

  double kl_sum = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& seq = samples[i];
    policy.check_sequence(seq);
    const double a = advantages[i];
    const double weight = inv_group / static_cast<double>(seq.size());
    const auto contexts = sequence_contexts(policy, seq);

    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto logp = policy.log_probabilities(contexts[t], t);
      const auto logp_old = old_policy.log_probabilities(contexts[t], t);
      const auto logq = reference.log_probabilities(contexts[t], t);
      const Symbol y = seq[t];
      const double ratio = std::exp(logp[y] - logp_old[y]);
      out.surrogate += weight * clipped_term(ratio, a, eps);

      // The unclipped branch is the active one unless the ratio has left the
      // trust interval in the direction the advantage rewards.
      const bool flat = (a > 0.0 && ratio > 1.0 + eps) || (a < 0.0 && ratio < 1.0 - eps);
      const double coeff = flat ? 0.0 : -weight * a * ratio;  // d(-S)/d log p_y

      double kl_row = 0.0;
      for (std::size_t k = 0; k < logp.size(); ++k) {
        kl_row += std::exp(logp[k]) * (logp[k] - logq[k]);
      }
      kl_sum += kl_row;

      const std::size_t base = policy.row_offset(contexts[t], t);
      for (std::size_t k = 0; k < logp.size(); ++k) {
        const double pk = std::exp(logp[k]);
        double g = -coeff * pk;
        g += config.kl_beta * inv_tokens * pk * (logp[k] - logq[k] - kl_row);
        out.gradient[base + k] += g;
      }
      out.gradient[base + y] += coeff;
    }
  }
  out.kl = kl_sum * inv_tokens;
  out.loss = -out.surrogate + config.kl_beta * out.kl;
  return out;
}

GrpoStepResult grpo_step(const ToyPolicy& policy, const ToyPolicy& reference,
                         const ToyPolicy& old_policy,
                         const GroundingInstance& instance,
                         const GrpoConfig& config, const RewardConfig& reward_config,
                         std::uint64_t sample_seed,
                         std::span<const std::vector<Symbol>> best_known) {
  config.validate();
  require_same_shape(policy, reference);
  require_same_shape(policy, old_policy);

  const auto group = sample_group(old_policy, config.group_size, sample_seed);
  std::vector<ScoreRequest> requests;
  requests.reserve(group.size());
  for (const auto& c : group) requests.push_back({&instance, c.text});
  const auto scores = score_batch(requests, reward_config);

  TrainingRecord record;
  record.stage = TrainingRecord::Stage::Grpo;
  std::vector<double> rewards(group.size());
  std::vector<std::vector<Symbol>> samples(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    rewards[i] = scores[i].r_total;
    samples[i] = group[i].symbols;
    record.mean_reward += scores[i].r_total;
    record.r_fmt_mean += scores[i].r_fmt;
    record.r_ent_mean += scores[i].r_ent;
    record.r_rel_mean += scores[i].r_rel;
  }
  const double g = static_cast<double>(group.size());
  record.mean_reward /= g;
  record.r_fmt_mean /= g;
  record.r_ent_mean /= g;
  record.r_rel_mean /= g;

  const auto advantages = group_advantages(rewards, config.advantage_epsilon);
  const GrpoLoss start =
      grpo_loss(policy, old_policy, reference, samples, advantages, config);
  record.loss = start.loss;
  record.kl = start.kl;

  ToyPolicy updated = policy;
  const double grad_sq = dot(start.gradient, start.gradient);
  if (grad_sq > 0.0) {
    double eta = config.learning_rate;
    for (int attempt = 0; attempt <= kMaxHalvings; ++attempt, eta *= 0.5) {
      ToyPolicy trial = policy;
      auto params = trial.parameters();
      for (std::size_t k = 0; k < params.size(); ++k) {
        params[k] -= eta * start.gradient[k];
      }
      const GrpoLoss next =
          grpo_loss(trial, old_policy, reference, samples, advantages, config);
      if (std::isfinite(next.loss) && next.loss <= start.loss - kArmijo * eta * grad_sq) {
        updated = std::move(trial);
        record.step_size = eta;
        break;
      }
    }
  }

  for (const auto& seq : best_known) record.p_best += std::exp(updated.sequence_log_prob(seq));
  return {std::move(updated), record};
}

}  // namespace groundrl
