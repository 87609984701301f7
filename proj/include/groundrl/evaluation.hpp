#ifndef GROUNDRL_EVALUATION_HPP_
#define GROUNDRL_EVALUATION_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "groundrl/domain.hpp"

namespace groundrl {

inline constexpr double kDefaultAccuracyThreshold = 0.5;

struct InstanceHits {
  int subject_hit = 0;
  int object_hits = 0;
  int object_total = 0;

  friend bool operator==(const InstanceHits&, const InstanceHits&) = default;
};

struct InstanceResult {
  std::string id;
  InstanceHits hits;
};

// Percentages in [0, 100].
struct MetricsReport {
  double acc_sub = 0.0;
  double acc_obj = 0.0;
  double macc_micro = 0.0;
  double macc_macro = 0.0;
  long subject_hits = 0;
  long instances = 0;
  long object_hits = 0;
  long object_total = 0;
  std::vector<InstanceResult> per_instance;
  // Prediction ids that name no instance of the dataset; excluded.
  std::vector<std::string> unknown_ids;
  double threshold = kDefaultAccuracyThreshold;
};

// Same matching as the reward; a ground-truth entity is a hit when its
// matched IoU is strictly above the threshold.
InstanceHits evaluate_instance(std::span<const ParsedEntity> predicted,
                               std::span<const Entity> ground_truth,
                               double threshold = kDefaultAccuracyThreshold);

// Instances without a prediction are scored as empty completions. The
// parallel version splits instances across OpenMP threads and reduces the
// counts; evaluate_dataset_serial is its reference.
MetricsReport evaluate_dataset(const std::map<std::string, std::string>& predictions,
                               std::span<const GroundingInstance> dataset,
                               double threshold = kDefaultAccuracyThreshold,
                               bool keep_per_instance = false);

MetricsReport evaluate_dataset_serial(
    const std::map<std::string, std::string>& predictions,
    std::span<const GroundingInstance> dataset,
    double threshold = kDefaultAccuracyThreshold, bool keep_per_instance = false);

// Fills the percentage fields from the raw counts.
void finalize_metrics(MetricsReport& report);

}  // namespace groundrl

#endif  // GROUNDRL_EVALUATION_HPP_
