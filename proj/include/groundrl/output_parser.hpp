#ifndef GROUNDRL_OUTPUT_PARSER_HPP_
#define GROUNDRL_OUTPUT_PARSER_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundrl/domain.hpp"

namespace groundrl {

// Level-1 check: after trimming, exactly `<think>...</think>` followed by
// `<answer>...</answer>` with only whitespace in between and nothing after.
bool check_structural_format(std::string_view text);

struct ExtractedEntities {
  std::vector<ParsedEntity> entities;
  int malformed_segment_count = 0;
};

// Level-2 extraction over an answer region. Segments are separated by commas
// outside brackets/parentheses; each must read
//   role ":" "[(" num "," num ")," "(" num "," num ")]"
// with free whitespace between tokens. Spans are relative to `answer_text`.
ExtractedEntities extract_entities(std::string_view answer_text);

// Runs both levels. When the template check fails, entities still come from
// the first <answer>...</answer> pair, or from the whole text if none exists.
ParsedCompletion parse_completion(std::string_view text);

// Shortest decimal rendering that parses back to the same double, never in
// exponent notation.
std::string format_coordinate(double value);

// `subject: [(x1, y1), (x2, y2)], object: [...]`
std::string serialize_answer(std::span<const ParsedEntity> entities);
std::string serialize_answer(std::span<const Entity> entities);

// `<think>...</think> <answer>...</answer>`; a missing think text is written
// as an empty block.
std::string serialize_completion(const ParsedCompletion& parsed);
std::string canonical_completion(std::string_view think_text,
                                 std::span<const Entity> entities);

}  // namespace groundrl

#endif  // GROUNDRL_OUTPUT_PARSER_HPP_
