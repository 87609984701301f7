#ifndef GROUNDRL_GRPO_HPP_
#define GROUNDRL_GRPO_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "groundrl/domain.hpp"
#include "groundrl/toy_policy.hpp"

namespace groundrl {

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_epsilon = 0.2;
  double kl_beta = 0.0025;
  double advantage_epsilon = 1e-8;
  // Initial step size of the backtracking line search.
  double learning_rate = 1e-5;
  std::size_t steps = 200;

  // Throws std::invalid_argument unless group_size >= 2, clip_epsilon > 0,
  // kl_beta >= 0, learning_rate > 0.
  void validate() const;
};

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // d loss / d logits, parameter layout
};

// Negative log-likelihood of `target` (summed over its positions) and its
// exact gradient. Throws std::invalid_argument for invalid targets.
LossAndGradient sft_loss(const ToyPolicy& policy, std::span<const Symbol> target);

// (R_i - mean) / (population std + epsilon).
std::vector<double> group_advantages(std::span<const double> rewards,
                                     double advantage_epsilon);

// min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
double clipped_term(double ratio, double advantage, double clip_epsilon);

// KL(p || q) for two categorical distributions of equal size.
double categorical_kl(std::span<const double> p, std::span<const double> q);

// Mean over every (context, position) visited by `sequences` of
// KL(policy || reference) at that context. Throws std::invalid_argument on
// shape mismatch.
double kl_divergence(const ToyPolicy& policy, const ToyPolicy& reference,
                     std::span<const std::vector<Symbol>> sequences);

struct GrpoLoss {
  double loss = 0.0;
  double surrogate = 0.0;
  double kl = 0.0;
  std::vector<double> gradient;
};

// loss = -(1/G) sum_i (1/|o_i|) sum_t clipped_term(r_it, A_i, eps)
//        + beta * kl_divergence(policy, reference, samples)
// with r_it the per-token probability ratio against `old_policy`.
GrpoLoss grpo_loss(const ToyPolicy& policy, const ToyPolicy& old_policy,
                   const ToyPolicy& reference,
                   std::span<const std::vector<Symbol>> samples,
                   std::span<const double> advantages, const GrpoConfig& config);

struct TrainingRecord {
  enum class Stage { Sft, Grpo };
  Stage stage = Stage::Grpo;
  std::size_t step = 0;
  double mean_reward = 0.0;
  double r_fmt_mean = 0.0;
  double r_ent_mean = 0.0;
  double r_rel_mean = 0.0;
  double kl = 0.0;
  double loss = 0.0;
  double p_best = 0.0;
  double step_size = 0.0;  // accepted line-search step, 0 if none
};

using TrainingTrace = std::vector<TrainingRecord>;

struct GrpoStepResult {
  ToyPolicy policy;
  TrainingRecord record;
};

// One optimisation step: sample G completions from old_policy, score them
// against the instance, normalise rewards within the group, and move the
// policy down the loss with a backtracking (Armijo) line search started at
// config.learning_rate. `best_known`, when given, lists the top-reward
// sequences; their total probability under the updated policy is reported as
// p_best.
GrpoStepResult grpo_step(const ToyPolicy& policy, const ToyPolicy& reference,
                         const ToyPolicy& old_policy,
                         const GroundingInstance& instance,
                         const GrpoConfig& config, const RewardConfig& reward_config,
                         std::uint64_t sample_seed,
                         std::span<const std::vector<Symbol>> best_known = {});

}  // namespace groundrl

#endif  // GROUNDRL_GRPO_HPP_
