#include "groundrl/batch.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdint>

#include "groundrl/reward.hpp"

namespace groundrl {

std::vector<RewardBreakdown> score_batch(std::span<const ScoreRequest> requests,
                                         const RewardConfig& config) {
  std::vector<RewardBreakdown> out(requests.size());
  const auto n = static_cast<std::int64_t>(requests.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const ScoreRequest& r = requests[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] =
        total_reward(r.completion, *r.instance, config);
  }
  return out;
}

std::vector<RewardBreakdown> score_batch_serial(
    std::span<const ScoreRequest> requests, const RewardConfig& config) {
  std::vector<RewardBreakdown> out;
  out.reserve(requests.size());
  for (const ScoreRequest& r : requests) {
    out.push_back(total_reward(r.completion, *r.instance, config));
  }
  return out;
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace groundrl
