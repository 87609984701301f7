#include "groundrl/reward.hpp"

#include <algorithm>
#include <vector>

#include "groundrl/output_parser.hpp"

namespace groundrl {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double tier_score(double iou_value, const RewardConfig& config) {
  for (const IouTier& tier : config.iou_tiers) {
    if (iou_value > tier.threshold) return tier.score;
  }
  return 0.0;
}

Matching match_entities(std::span<const ParsedEntity> predicted,
                        std::span<const Entity> ground_truth) {
  const std::size_t np = predicted.size();
  const std::size_t ng = ground_truth.size();
  std::vector<double> overlap(np * ng, 0.0);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (predicted[p].role == ground_truth[g].role) {
        overlap[p * ng + g] = iou(predicted[p].bbox, ground_truth[g].bbox);
      }
    }
  }

  std::vector<bool> pred_used(np, false);
  std::vector<bool> gt_used(ng, false);
  Matching matching;
  for (;;) {
    double best = 0.0;
    std::size_t best_p = np;
    std::size_t best_g = ng;
    // Row-major scan with strict '>' keeps the lowest (p, g) among ties.
    for (std::size_t p = 0; p < np; ++p) {
      if (pred_used[p]) continue;
      for (std::size_t g = 0; g < ng; ++g) {
        if (gt_used[g]) continue;
        if (overlap[p * ng + g] > best) {
          best = overlap[p * ng + g];
          best_p = p;
          best_g = g;
        }
      }
    }
    if (best_p == np) break;
    pred_used[best_p] = true;
    gt_used[best_g] = true;
    matching.pairs.push_back({best_p, best_g, best});
  }

  for (std::size_t p = 0; p < np; ++p) {
    if (!pred_used[p]) matching.unmatched_predictions.push_back(p);
  }
  for (std::size_t g = 0; g < ng; ++g) {
    if (!gt_used[g]) matching.unmatched_ground_truths.push_back(g);
  }
  return matching;
}

double format_reward(const ParsedCompletion& parsed, const RewardConfig& config) {
  double r = 0.0;
  if (parsed.structural_ok) r += config.lambda1;
  if (!parsed.entities.empty()) r += config.lambda2;
  return r;
}

double entity_reward(const Matching& matching,
                     std::span<const ParsedEntity> predicted,
                     const RewardConfig& config) {
  if (predicted.empty()) return 0.0;
  std::vector<double> matched_iou(predicted.size(), 0.0);
  for (const EntityMatch& m : matching.pairs) matched_iou[m.prediction] = m.iou;

  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double alpha = predicted[i].role == EntityRole::Subject
                             ? config.alpha_subject
                             : config.alpha_object;
    sum += alpha * tier_score(matched_iou[i], config);
  }
  return sum / static_cast<double>(predicted.size());
}

double relational_reward(const Matching& matching,
                         std::span<const Entity> ground_truth,
                         const RewardConfig& config) {
  int subjects_hit = 0;
  int objects_hit = 0;
  for (const EntityMatch& m : matching.pairs) {
    if (m.iou <= config.match_threshold) continue;
    if (ground_truth[m.ground_truth].role == EntityRole::Subject) {
      ++subjects_hit;
    } else {
      ++objects_hit;
    }
  }
  double r = 0.0;
  if (subjects_hit >= 1 && objects_hit >= 1) r += config.beta1;
  if (objects_hit >= 2) r += config.beta2;
  return r;
}

RewardBreakdown score_parsed(const ParsedCompletion& parsed,
                             std::span<const Entity> ground_truth,
                             const RewardConfig& config) {
  const Matching matching = match_entities(parsed.entities, ground_truth);
  RewardBreakdown out;
  out.r_fmt = format_reward(parsed, config);
  out.r_ent = entity_reward(matching, parsed.entities, config);
  out.r_rel = relational_reward(matching, ground_truth, config);
  out.r_total = out.r_fmt + out.r_ent + out.r_rel;
  out.matching = matching.pairs;
  out.unmatched_predictions = matching.unmatched_predictions;
  return out;
}

RewardBreakdown total_reward(std::string_view completion,
                             const GroundingInstance& instance,
                             const RewardConfig& config) {
  return score_parsed(parse_completion(completion), instance.entities(), config);
}

}  // namespace groundrl
