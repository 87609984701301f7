#include "groundrl/evaluation.hpp"

#include <cstdint>
#include <set>
#include <stdexcept>

#include "groundrl/output_parser.hpp"
#include "groundrl/reward.hpp"

namespace groundrl {

namespace {

InstanceHits score_instance(const std::map<std::string, std::string>& predictions,
                            const GroundingInstance& instance, double threshold) {
  const auto it = predictions.find(instance.id());
  const std::string_view completion =
      it == predictions.end() ? std::string_view{} : std::string_view(it->second);
  const ParsedCompletion parsed = parse_completion(completion);
  return evaluate_instance(parsed.entities, instance.entities(), threshold);
}

std::vector<std::string> unknown_prediction_ids(
    const std::map<std::string, std::string>& predictions,
    std::span<const GroundingInstance> dataset) {
  std::set<std::string> known;
  for (const GroundingInstance& instance : dataset) known.insert(instance.id());
  std::vector<std::string> unknown;
  for (const auto& [id, completion] : predictions) {
    if (!known.contains(id)) unknown.push_back(id);
  }
  return unknown;
}

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("accuracy threshold must lie in (0, 1)");
  }
}

}  // namespace

InstanceHits evaluate_instance(std::span<const ParsedEntity> predicted,
                               std::span<const Entity> ground_truth,
                               double threshold) {
  const Matching matching = match_entities(predicted, ground_truth);
  InstanceHits hits;
  for (const Entity& e : ground_truth) {
    if (e.role == EntityRole::Object) ++hits.object_total;
  }
  for (const EntityMatch& m : matching.pairs) {
    if (m.iou <= threshold) continue;
    if (ground_truth[m.ground_truth].role == EntityRole::Subject) {
      hits.subject_hit = 1;
    } else {
      ++hits.object_hits;
    }
  }
  return hits;
}

void finalize_metrics(MetricsReport& report) {
  auto pct = [](long num, long den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
  };
  report.acc_sub = pct(report.subject_hits, report.instances);
  report.acc_obj = pct(report.object_hits, report.object_total);
  report.macc_micro = pct(report.subject_hits + report.object_hits,
                          report.instances + report.object_total);
  report.macc_macro = 0.5 * (report.acc_sub + report.acc_obj);
}

MetricsReport evaluate_dataset(const std::map<std::string, std::string>& predictions,
                               std::span<const GroundingInstance> dataset,
                               double threshold, bool keep_per_instance) {
  check_threshold(threshold);
  MetricsReport report;
  report.threshold = threshold;
  report.unknown_ids = unknown_prediction_ids(predictions, dataset);

  const auto n = static_cast<std::int64_t>(dataset.size());
  std::vector<InstanceHits> hits(dataset.size());
  long subject_hits = 0;
  long object_hits = 0;
  long object_total = 0;
#pragma omp parallel for schedule(dynamic, 32) \
    reduction(+ : subject_hits, object_hits, object_total)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    hits[idx] = score_instance(predictions, dataset[idx], threshold);
    subject_hits += hits[idx].subject_hit;
    object_hits += hits[idx].object_hits;
    object_total += hits[idx].object_total;
  }

  report.instances = static_cast<long>(dataset.size());
  report.subject_hits = subject_hits;
  report.object_hits = object_hits;
  report.object_total = object_total;
  if (keep_per_instance) {
    report.per_instance.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      report.per_instance.push_back({dataset[i].id(), hits[i]});
    }
  }
  finalize_metrics(report);
  return report;
}

MetricsReport evaluate_dataset_serial(
    const std::map<std::string, std::string>& predictions,
    std::span<const GroundingInstance> dataset, double threshold,
    bool keep_per_instance) {
  check_threshold(threshold);
  MetricsReport report;
  report.threshold = threshold;
  report.unknown_ids = unknown_prediction_ids(predictions, dataset);
  for (const GroundingInstance& instance : dataset) {
    const InstanceHits h = score_instance(predictions, instance, threshold);
    ++report.instances;
    report.subject_hits += h.subject_hit;
    report.object_hits += h.object_hits;
    report.object_total += h.object_total;
    if (keep_per_instance) report.per_instance.push_back({instance.id(), h});
  }
  finalize_metrics(report);
  return report;
}

}  // namespace groundrl
