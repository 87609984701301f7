#ifndef GROUNDRL_BATCH_HPP_
#define GROUNDRL_BATCH_HPP_

#include <span>
#include <string_view>
#include <vector>

#include "groundrl/domain.hpp"

namespace groundrl {

struct ScoreRequest {
  const GroundingInstance* instance;
  std::string_view completion;
};

// OpenMP kernel: one independent total_reward per request, results in input
// order.
std::vector<RewardBreakdown> score_batch(std::span<const ScoreRequest> requests,
                                         const RewardConfig& config);

// Single-threaded reference for score_batch.
std::vector<RewardBreakdown> score_batch_serial(
    std::span<const ScoreRequest> requests, const RewardConfig& config);

// Threads OpenMP would use for a parallel region (1 without OpenMP).
int max_threads();

}  // namespace groundrl

#endif  // GROUNDRL_BATCH_HPP_
