#ifndef GROUNDRL_TOY_TASK_HPP_
#define GROUNDRL_TOY_TASK_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "groundrl/domain.hpp"
#include "groundrl/grpo.hpp"
#include "groundrl/toy_policy.hpp"

namespace groundrl {

// Placeholder think text used for stage-I targets of instances without a
// reasoning trace.
inline constexpr std::string_view kPlaceholderThink =
    "The expression names a subject and the objects it relates to.";
inline constexpr std::string_view kRefusalToken = "no target found";

// Token worlds for the toy policy.
//   Chunks: the four tags, think bodies, one token per role-labelled box
//     (ground truth, role-swapped, and mirrored decoys), a ", " separator, a
//     refusal string, and stop. Composition has to be learned.
//   TwoCompletion: each instance's whole canonical completion is one token,
//     next to the refusal and stop, so a policy picks between two answers.
enum class ToyWorld { Chunks, TwoCompletion };

std::string_view toy_world_name(ToyWorld world);
std::optional<ToyWorld> parse_toy_world(std::string_view text);

class ToyTask {
 public:
  // Throws std::invalid_argument for an empty instance list.
  explicit ToyTask(std::span<const GroundingInstance> instances,
                   ToyWorld world = ToyWorld::Chunks);

  ToyWorld world() const { return world_; }

  const Vocabulary& vocabulary() const { return vocabulary_; }
  std::size_t max_length() const { return max_length_; }

  // Uniform logits plus `prior_strength` on grammatical successors (tag
  // order, entity/separator alternation). It knows the template but not
  // which boxes are right.
  ToyPolicy base_policy(double prior_strength) const;

  // Symbols of the canonical completion: think block with the instance's
  // trace (or the placeholder), answer block with every ground-truth
  // entity, then stop.
  std::vector<Symbol> canonical_target(const GroundingInstance& instance) const;

  // Every completion sharing the canonical target's reward: any think body,
  // any entity order. Instances with more than kMaxPermutedEntities entities
  // keep the ground-truth order.
  static constexpr std::size_t kMaxPermutedEntities = 6;
  std::vector<std::vector<Symbol>> best_completions(const GroundingInstance& instance) const;

  // Symbols for the refusal completion (refusal token, stop).
  std::vector<Symbol> refusal_target() const;

 private:
  ToyWorld world_;
  Vocabulary vocabulary_;
  std::size_t max_length_ = 0;
  std::vector<Symbol> entity_symbols_;
  std::vector<Symbol> think_symbols_;
  std::vector<Symbol> completion_symbols_;
};

// Synthetic fixture: one 1-subject/1-object instance in a
// 100x100 image, where the canonical completion earns the full reward and
// the refusal earns nothing.
GroundingInstance synthetic_instance();

struct ToyTrainingConfig {
  GrpoConfig grpo;
  RewardConfig reward;
  bool run_sft = true;
  bool run_grpo = true;
  std::size_t sft_steps = 10;
  double sft_learning_rate = 0.5;
  double prior_strength = 2.0;
  ToyWorld world = ToyWorld::Chunks;
  std::uint64_t seed = 20240601;

  // Stage-II defaults for the toy (group of 8, paper KL weight) with a
  // learning rate suited to tabular logits.
  static ToyTrainingConfig two_stage();
  // No cold start; both format weights raised to 0.5.
  static ToyTrainingConfig grpo_only();
};

struct ToyTrainingResult {
  ToyPolicy policy;
  ToyPolicy reference;
  TrainingTrace trace;
};

// Mean SFT loss over the targets and the matching gradient.
LossAndGradient sft_batch_loss(const ToyPolicy& policy,
                               std::span<const std::vector<Symbol>> targets);

// Stage I: gradient descent on the stage-I targets (CoT-bearing training
// instances, or every training instance if none carries a trace). The
// resulting policy is frozen as the reference. Stage II: config.grpo.steps
// GRPO steps cycling over training instances, the old-policy snapshot being
// refreshed every step. Throws std::invalid_argument on an empty dataset.
ToyTrainingResult train_two_stage(std::span<const GroundingInstance> dataset,
                                  const ToyTrainingConfig& config);

// First stage-II step (1-based) whose p_best exceeds the threshold, or 0.
std::size_t steps_to_threshold(const TrainingTrace& trace, double threshold);

// CSV with header
//   stage,step,mean_reward,r_fmt_mean,r_ent_mean,r_rel_mean,kl,loss,p_best
void write_trace_csv(std::ostream& out, const TrainingTrace& trace);

}  // namespace groundrl

#endif  // GROUNDRL_TOY_TASK_HPP_
