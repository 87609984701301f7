#include <doctest.h>

#include <random>
#include <string>

#include "groundrl/output_parser.hpp"
#include "oracles.hpp"

using namespace groundrl;

TEST_CASE("structural template") {
  CHECK(check_structural_format(
      "<think>reasoning</think> <answer>subject: [(1, 2), (3, 4)]</answer>"));
  CHECK_FALSE(check_structural_format(""));
  CHECK_FALSE(check_structural_format(
      "<answer>subject: [(1, 2), (3, 4)]</answer><think>x</think>"));
  CHECK(check_structural_format("  <think></think><answer></answer>\n"));
  CHECK_FALSE(check_structural_format("<think>a</think> <answer>x</answer> trailing"));
  CHECK_FALSE(check_structural_format("<think><think>a</think></think><answer></answer>"));
  CHECK_FALSE(check_structural_format("<think>a</think><answer>x</answer><answer>y</answer>"));
}

TEST_CASE("entity extraction") {
  auto two = extract_entities("subject: [(10, 20), (30, 40)], object: [(50, 60), (70, 80)]");
  REQUIRE(two.entities.size() == 2);
  CHECK(two.malformed_segment_count == 0);
  CHECK(two.entities[0].role == EntityRole::Subject);
  CHECK(two.entities[0].bbox == BoundingBox(10, 20, 30, 40));
  CHECK(two.entities[1].role == EntityRole::Object);
  CHECK(two.entities[1].bbox == BoundingBox(50, 60, 70, 80));

  auto flat = extract_entities("subject: [(10, 20), (10, 40)]");
  CHECK(flat.entities.empty());
  CHECK(flat.malformed_segment_count == 1);

  auto banana = extract_entities(
      "subject: [(0,0),(4,4)], banana: [(1,1),(2,2)], object: [(5,5),(9,9)]");
  CHECK(banana.entities.size() == 2);
  CHECK(banana.malformed_segment_count == 1);

  CHECK(extract_entities("Subject : [ ( 1.5 , 2 ) , ( 3 , 4.25 ) ]").entities.size() == 1);
  CHECK(extract_entities("subject: [(-1, 2), (3, 4)]").malformed_segment_count == 1);
  CHECK(extract_entities("subject: [(-0, 2), (3, 4)]").malformed_segment_count == 1);
  CHECK(extract_entities("subject: [(1e1, 2), (30, 40)]").malformed_segment_count == 1);
  CHECK(extract_entities("   ").malformed_segment_count == 0);
}

TEST_CASE("source spans point at the segment text") {
  const std::string answer = "subject: [(1, 2), (3, 4)], object: [(5, 6), (7, 8)]";
  auto got = extract_entities(answer);
  REQUIRE(got.entities.size() == 2);
  const auto& s = got.entities[1].source_span;
  CHECK(answer.substr(s.begin, s.size()) == "object: [(5, 6), (7, 8)]");

  const std::string full = "<think>t</think> <answer>" + answer + "</answer>";
  auto parsed = parse_completion(full);
  const auto& s0 = parsed.entities[0].source_span;
  CHECK(full.substr(s0.begin, s0.size()) == "subject: [(1, 2), (3, 4)]");
}

TEST_CASE("parse_completion modes") {
  auto good = parse_completion(
      "<think>r</think> <answer>subject: [(1, 1), (2, 2)], object: [(3, 3), (4, 4)]</answer>");
  CHECK(good.structural_ok);
  CHECK(good.think_text == "r");
  CHECK(good.entities.size() == 2);

  auto bare = parse_completion("subject: [(1, 1), (2, 2)]");
  CHECK_FALSE(bare.structural_ok);
  CHECK_FALSE(bare.think_text.has_value());
  CHECK(bare.entities.size() == 1);

  auto empty = parse_completion("<think>t</think><answer></answer>");
  CHECK(empty.structural_ok);
  CHECK(empty.entities.empty());

  // Broken template, answer block still readable.
  auto half = parse_completion("<answer>object: [(1, 1), (2, 2)]</answer> junk");
  CHECK_FALSE(half.structural_ok);
  CHECK(half.entities.size() == 1);
}

TEST_CASE("coordinates print in shortest form") {
  CHECK(format_coordinate(10.0) == "10");
  CHECK(format_coordinate(2.5) == "2.5");
  CHECK(format_coordinate(0.125) == "0.125");
}

TEST_CASE("serialize/parse round trip on random completions") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto entities = oracle::random_entities(rng, 5);
    const std::string text = canonical_completion(oracle::random_think(rng), entities);
    const ParsedCompletion p1 = parse_completion(text);
    REQUIRE(p1.structural_ok);
    REQUIRE(p1.entities.size() == entities.size());
    for (std::size_t i = 0; i < entities.size(); ++i) {
      CHECK(p1.entities[i].role == entities[i].role);
      CHECK(p1.entities[i].bbox == entities[i].bbox);
    }
    const std::string s1 = serialize_completion(p1);
    CHECK(s1 == text);
    CHECK(serialize_completion(parse_completion(s1)) == s1);
  }
}

TEST_CASE("corrupting a segment loses exactly that entity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto entities = oracle::random_entities(rng, 4);
    std::string answer;
    const std::size_t broken = std::uniform_int_distribution<std::size_t>(
        0, entities.size() - 1)(rng);
    for (std::size_t i = 0; i < entities.size(); ++i) {
      if (i > 0) answer += ", ";
      std::string seg = serialize_answer(std::span<const Entity>(&entities[i], 1));
      if (i == broken) seg.replace(0, seg.find(':'), "thing");
      answer += seg;
    }
    const auto got = extract_entities(answer);
    CHECK(got.malformed_segment_count == 1);
    CHECK(got.entities.size() == entities.size() - 1);
  }
}

TEST_CASE("parsing is deterministic") {
  const std::string text =
      "<think>a</think> <answer>subject: [(1, 2), (3, 4)], object: [(0, 0), (9, 9)]</answer>";
  CHECK(parse_completion(text) == parse_completion(text));
}
