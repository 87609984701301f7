#include <doctest.h>

#include <random>
#include <vector>

#include "groundrl/output_parser.hpp"
#include "groundrl/reward.hpp"
#include "oracles.hpp"

using namespace groundrl;

namespace {

ParsedEntity pred(EntityRole role, double x1, double y1, double x2, double y2) {
  return {role, BoundingBox(x1, y1, x2, y2), {}};
}

// Box of width 10 in [0,10]x[0,10] with a second box sliding along x,
// chosen so that iou(gt, slid(s)) = (10 - s) / (10 + s).
BoundingBox slid(double s) { return BoundingBox(s, 0, 10 + s, 10); }
double shift_for(double target_iou) { return 10.0 * (1 - target_iou) / (1 + target_iou); }

}  // namespace

TEST_CASE("iou examples") {
  const BoundingBox a(3, 4, 10, 12);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(BoundingBox(0, 0, 1, 1), BoundingBox(2, 2, 3, 3)) == 0.0);
  CHECK(iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 0, 3, 2)) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(iou(BoundingBox(0, 0, 1, 1), BoundingBox(1, 0, 2, 1)) == 0.0);  // touching edge
}

TEST_CASE("iou agrees with the clipping oracle") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto a = oracle::random_box(rng, 50, 50), b = oracle::random_box(rng, 50, 50);
    CHECK(iou(a, b) == doctest::Approx(oracle::clipped_iou(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("tier table uses strict thresholds") {
  const RewardConfig c;
  CHECK(tier_score(0.8, c) == 1.0);
  CHECK(tier_score(0.5, c) == 0.4);
  CHECK(tier_score(0.0, c) == 0.0);
  CHECK(tier_score(0.76, c) == 1.0);
  CHECK(tier_score(0.75, c) == 0.8);
  CHECK(tier_score(0.51, c) == 0.8);
  CHECK(tier_score(0.26, c) == 0.4);
  CHECK(tier_score(0.25, c) == 0.0);
  CHECK(tier_score(1.0, c) == 1.0);
}

TEST_CASE("matching examples") {
  const std::vector<Entity> gt = {{EntityRole::Subject, BoundingBox(0, 0, 10, 10)},
                                  {EntityRole::Object, BoundingBox(20, 0, 30, 10)}};
  SUBCASE("unique role pairing") {
    std::vector<ParsedEntity> p = {{EntityRole::Subject, slid(shift_for(0.9)), {}},
                                   pred(EntityRole::Object, 20 + shift_for(0.6), 0,
                                        30 + shift_for(0.6), 10)};
    const auto m = match_entities(p, gt);
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0].iou == doctest::Approx(0.9));
    CHECK(m.pairs[1].iou == doctest::Approx(0.6));
    CHECK(m.unmatched_predictions.empty());
  }
  SUBCASE("best of two objects wins") {
    const double s3 = shift_for(0.3), s7 = shift_for(0.7);
    std::vector<ParsedEntity> p = {pred(EntityRole::Object, 20 + s3, 0, 30 + s3, 10),
                                   pred(EntityRole::Object, 20 + s7, 0, 30 + s7, 10)};
    const std::vector<Entity> one = {gt[1]};
    const auto m = match_entities(p, one);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].prediction == 1);
    CHECK(m.pairs[0].iou == doctest::Approx(0.7));
    CHECK(m.unmatched_predictions == std::vector<std::size_t>{0});
  }
  SUBCASE("no cross-role matches") {
    std::vector<ParsedEntity> p = {pred(EntityRole::Subject, 20, 0, 30, 10)};
    const auto m = match_entities(p, gt);
    CHECK(m.pairs.empty());
    CHECK(m.unmatched_predictions == std::vector<std::size_t>{0});
    CHECK(m.unmatched_ground_truths.size() == 2);
  }
  SUBCASE("ties go to the lower prediction index") {
    std::vector<ParsedEntity> p = {pred(EntityRole::Subject, 0, 0, 10, 10),
                                   pred(EntityRole::Subject, 0, 0, 10, 10)};
    const auto m = match_entities(p, gt);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].prediction == 0);
  }
}

TEST_CASE("matching equals the sorted-pairs oracle") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> n(0, 4), coin(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ParsedEntity> p(n(rng), pred(EntityRole::Subject, 0, 0, 1, 1));
    std::vector<Entity> g(n(rng), {EntityRole::Subject, BoundingBox(0, 0, 1, 1)});
    for (auto& e : p) e = {coin(rng) ? EntityRole::Subject : EntityRole::Object,
                           oracle::random_box(rng, 12, 12), {}};
    for (auto& e : g) e = {coin(rng) ? EntityRole::Subject : EntityRole::Object,
                           oracle::random_box(rng, 12, 12)};
    const auto got = match_entities(p, g);
    const auto want = oracle::greedy_by_sort(p, g);
    REQUIRE(got.pairs.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(got.pairs[k].prediction == want[k].p);
      CHECK(got.pairs[k].ground_truth == want[k].g);
    }
  }
}

TEST_CASE("format reward") {
  const RewardConfig c;
  ParsedCompletion parsed;
  parsed.structural_ok = true;
  parsed.entities = {pred(EntityRole::Subject, 0, 0, 1, 1)};
  CHECK(format_reward(parsed, c) == doctest::Approx(0.6).epsilon(1e-15));
  parsed.structural_ok = false;
  CHECK(format_reward(parsed, c) == doctest::Approx(0.3).epsilon(1e-15));
  parsed.entities.clear();
  CHECK(format_reward(parsed, c) == 0.0);
  parsed.structural_ok = true;
  CHECK(format_reward(parsed, c) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(format_reward(parsed, RewardConfig::grpo_only()) == doctest::Approx(0.5));
}

TEST_CASE("entity and relational rewards") {
  const RewardConfig c;
  const std::vector<Entity> gt = {{EntityRole::Subject, BoundingBox(0, 0, 10, 10)},
                                  {EntityRole::Object, BoundingBox(20, 0, 30, 10)},
                                  {EntityRole::Object, BoundingBox(40, 0, 50, 10)}};
  auto object_at = [](double x0, double s) {
    return pred(EntityRole::Object, x0 + s, 0, x0 + 10 + s, 10);
  };

  const std::vector<ParsedEntity> perfect = {pred(EntityRole::Subject, 0, 0, 10, 10),
                                             object_at(20, 0)};
  auto m = match_entities(perfect, gt);
  CHECK(entity_reward(m, perfect, c) == doctest::Approx(1.375).epsilon(1e-15));
  CHECK(entity_reward(match_entities({}, gt), {}, c) == 0.0);

  const std::vector<ParsedEntity> partial = {{EntityRole::Subject, slid(shift_for(0.6)), {}},
                                             object_at(20, shift_for(0.3))};
  m = match_entities(partial, gt);
  CHECK(entity_reward(m, partial, c) == doctest::Approx(0.85));

  const std::vector<ParsedEntity> rel1 = {{EntityRole::Subject, slid(shift_for(0.5)), {}},
                                          object_at(20, shift_for(0.4))};
  CHECK(relational_reward(match_entities(rel1, gt), gt, c) == doctest::Approx(0.3));

  const std::vector<ParsedEntity> rel2 = {pred(EntityRole::Subject, 0, 0, 10, 10),
                                          object_at(20, 0), object_at(40, 0)};
  CHECK(relational_reward(match_entities(rel2, gt), gt, c) == doctest::Approx(0.6));

  const std::vector<ParsedEntity> lone = {pred(EntityRole::Subject, 0, 0, 10, 10)};
  CHECK(relational_reward(match_entities(lone, gt), gt, c) == 0.0);

  // Objects matched without the subject still earn the second term.
  const std::vector<ParsedEntity> objects_only = {object_at(20, 0), object_at(40, 0)};
  CHECK(relational_reward(match_entities(objects_only, gt), gt, c) == doctest::Approx(0.3));

  // A matched pair at IoU <= 0.25 does not count as m_k = 1.
  const std::vector<ParsedEntity> weak = {{EntityRole::Subject, slid(shift_for(0.25)), {}},
                                          object_at(20, 0)};
  CHECK(relational_reward(match_entities(weak, gt), gt, c) == 0.0);
}

TEST_CASE("total reward") {
  const GroundingInstance inst("i", "img", 100, 100, "e",
                               {{EntityRole::Subject, BoundingBox(10, 10, 40, 40)},
                                {EntityRole::Object, BoundingBox(60, 55, 95, 90)}},
                               std::nullopt, Split::Train);
  const RewardConfig c;
  const auto perfect = total_reward(canonical_completion("t", inst.entities()), inst, c);
  CHECK(perfect.r_fmt == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(perfect.r_ent == doctest::Approx(1.375).epsilon(1e-15));
  CHECK(perfect.r_rel == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(std::abs(perfect.r_total - 2.275) <= 1e-12);

  CHECK(total_reward("", inst, c).r_total == 0.0);

  const std::vector<Entity> far = {{EntityRole::Subject, BoundingBox(50, 0, 55, 5)},
                                   {EntityRole::Object, BoundingBox(0, 95, 5, 100)}};
  const auto disjoint = total_reward(canonical_completion("t", far), inst, c);
  CHECK(disjoint.r_total == doctest::Approx(0.6));
  CHECK(disjoint.unmatched_predictions.size() == 2);
}
