#ifndef GROUNDRL_REWARD_HPP_
#define GROUNDRL_REWARD_HPP_

#include <span>
#include <string_view>

#include "groundrl/domain.hpp"

namespace groundrl {

// Intersection over union; 0 for disjoint or edge-touching boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Score of the first tier whose threshold the IoU strictly exceeds, else 0.
double tier_score(double iou_value, const RewardConfig& config);

// Role-constrained one-to-one greedy matching. The highest-IoU same-role pair
// is taken first (ties: lower prediction index, then lower ground-truth
// index), both sides are removed, and the loop repeats while some remaining
// pair has IoU > 0.
Matching match_entities(std::span<const ParsedEntity> predicted,
                        std::span<const Entity> ground_truth);

double format_reward(const ParsedCompletion& parsed, const RewardConfig& config);

// Weighted mean over *predicted* entities of alpha(role) * tier(iou); an
// unmatched prediction contributes 0. Returns 0 with no predictions.
double entity_reward(const Matching& matching,
                     std::span<const ParsedEntity> predicted,
                     const RewardConfig& config);

// beta1 when the subject and at least one object are matched above
// match_threshold, plus beta2 when at least two objects are.
double relational_reward(const Matching& matching,
                         std::span<const Entity> ground_truth,
                         const RewardConfig& config);

RewardBreakdown score_parsed(const ParsedCompletion& parsed,
                             std::span<const Entity> ground_truth,
                             const RewardConfig& config);

RewardBreakdown total_reward(std::string_view completion,
                             const GroundingInstance& instance,
                             const RewardConfig& config);

}  // namespace groundrl

#endif  // GROUNDRL_REWARD_HPP_
