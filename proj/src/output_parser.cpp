#include "groundrl/output_parser.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace groundrl {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool contains_any_tag(std::string_view s) {
  for (std::string_view tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (s.find(tag) != std::string_view::npos) return true;
  }
  return false;
}

struct TemplateParts {
  std::size_t think_begin;
  std::size_t think_end;
  std::size_t answer_begin;
  std::size_t answer_end;
};

// Offsets are into the untrimmed input.
std::optional<TemplateParts> match_template(std::string_view text) {
  std::size_t pos = 0;
  while (pos < text.size() && is_space(text[pos])) ++pos;
  if (text.substr(pos, kThinkOpen.size()) != kThinkOpen) return std::nullopt;
  pos += kThinkOpen.size();
  const std::size_t think_begin = pos;
  const std::size_t think_end = text.find(kThinkClose, pos);
  if (think_end == std::string_view::npos) return std::nullopt;
  if (contains_any_tag(text.substr(think_begin, think_end - think_begin))) {
    return std::nullopt;
  }
  pos = think_end + kThinkClose.size();
  while (pos < text.size() && is_space(text[pos])) ++pos;
  if (text.substr(pos, kAnswerOpen.size()) != kAnswerOpen) return std::nullopt;
  pos += kAnswerOpen.size();
  const std::size_t answer_begin = pos;
  const std::size_t answer_end = text.find(kAnswerClose, pos);
  if (answer_end == std::string_view::npos) return std::nullopt;
  if (contains_any_tag(text.substr(answer_begin, answer_end - answer_begin))) {
    return std::nullopt;
  }
  pos = answer_end + kAnswerClose.size();
  while (pos < text.size() && is_space(text[pos])) ++pos;
  if (pos != text.size()) return std::nullopt;
  return TemplateParts{think_begin, think_end, answer_begin, answer_end};
}

// Cursor over a single segment; every expect_* skips leading whitespace.
class SegmentReader {
 public:
  explicit SegmentReader(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && is_space(s_[pos_])) ++pos_;
  }

  bool expect(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view word() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      ++pos_;
    }
    return s_.substr(start, pos_ - start);
  }

  // Signed decimal: [+-]? (digits [. digits*] | . digits)
  std::optional<double> number() {
    skip_ws();
    std::size_t p = pos_;
    bool negative = false;
    if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) {
      negative = s_[p] == '-';
      ++p;
    }
    const std::size_t digits_begin = p;
    std::size_t int_digits = 0;
    std::size_t frac_digits = 0;
    while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
      ++p;
      ++int_digits;
    }
    if (p < s_.size() && s_[p] == '.') {
      ++p;
      while (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        ++p;
        ++frac_digits;
      }
    }
    if (int_digits == 0 && frac_digits == 0) return std::nullopt;
    double value = 0.0;
    const char* first = s_.data() + digits_begin;
    const char* last = s_.data() + p;
    const auto [ptr, ec] =
        std::from_chars(first, last, value, std::chars_format::fixed);
    if (ec != std::errc() || ptr != last) return std::nullopt;
    pos_ = p;
    return negative ? -value : value;
  }

  bool at_end() {
    skip_ws();
    return pos_ == s_.size();
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::optional<ParsedEntity> parse_segment(std::string_view segment,
                                          std::size_t offset) {
  SegmentReader r(segment);
  const auto role = parse_role(r.word());
  if (!role || !r.expect(':') || !r.expect('[')) return std::nullopt;
  std::array<double, 4> c{};
  for (int point = 0; point < 2; ++point) {
    if (point == 1 && !r.expect(',')) return std::nullopt;
    if (!r.expect('(')) return std::nullopt;
    const auto x = r.number();
    if (!x || !r.expect(',')) return std::nullopt;
    const auto y = r.number();
    if (!y || !r.expect(')')) return std::nullopt;
    c[point * 2] = *x;
    c[point * 2 + 1] = *y;
  }
  if (!r.expect(']') || !r.at_end()) return std::nullopt;
  for (double v : c) {
    if (std::signbit(v)) return std::nullopt;
  }
  const auto box = BoundingBox::make(c[0], c[1], c[2], c[3]);
  if (!box) return std::nullopt;

  std::size_t b = 0;
  std::size_t e = segment.size();
  while (b < e && is_space(segment[b])) ++b;
  while (e > b && is_space(segment[e - 1])) --e;
  return ParsedEntity{*role, *box, SourceSpan{offset + b, offset + e}};
}

void append_entity(std::string& out, EntityRole role, const BoundingBox& b) {
  out += role_name(role);
  out += ": [(";
  out += format_coordinate(b.x1());
  out += ", ";
  out += format_coordinate(b.y1());
  out += "), (";
  out += format_coordinate(b.x2());
  out += ", ";
  out += format_coordinate(b.y2());
  out += ")]";
}

}  // namespace

bool check_structural_format(std::string_view text) {
  return match_template(text).has_value();
}

ExtractedEntities extract_entities(std::string_view answer_text) {
  ExtractedEntities out;
  if (trim(answer_text).empty()) return out;

  auto flush = [&](std::size_t begin, std::size_t end) {
    const std::string_view segment = answer_text.substr(begin, end - begin);
    if (auto entity = parse_segment(segment, begin)) {
      out.entities.push_back(*entity);
    } else {
      ++out.malformed_segment_count;
    }
  };

  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < answer_text.size(); ++i) {
    const char c = answer_text[i];
    if (c == '[' || c == '(') {
      ++depth;
    } else if ((c == ']' || c == ')') && depth > 0) {
      --depth;
    } else if (c == ',' && depth == 0) {
      flush(start, i);
      start = i + 1;
    }
  }
  flush(start, answer_text.size());
  return out;
}

ParsedCompletion parse_completion(std::string_view text) {
  ParsedCompletion parsed;
  std::size_t region_begin = 0;
  std::size_t region_end = text.size();

  if (const auto parts = match_template(text)) {
    parsed.structural_ok = true;
    parsed.think_text = std::string(
        text.substr(parts->think_begin, parts->think_end - parts->think_begin));
    region_begin = parts->answer_begin;
    region_end = parts->answer_end;
  } else if (const std::size_t open = text.find(kAnswerOpen);
             open != std::string_view::npos) {
    const std::size_t inner = open + kAnswerOpen.size();
    const std::size_t close = text.find(kAnswerClose, inner);
    if (close != std::string_view::npos) {
      region_begin = inner;
      region_end = close;
    }
  }

  ExtractedEntities extracted =
      extract_entities(text.substr(region_begin, region_end - region_begin));
  for (ParsedEntity& e : extracted.entities) {
    e.source_span.begin += region_begin;
    e.source_span.end += region_begin;
  }
  parsed.entities = std::move(extracted.entities);
  parsed.malformed_segment_count = extracted.malformed_segment_count;
  return parsed;
}

std::string format_coordinate(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(),
                                       value, std::chars_format::fixed);
  if (ec != std::errc()) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

std::string serialize_answer(std::span<const ParsedEntity> entities) {
  std::string out;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (i > 0) out += ", ";
    append_entity(out, entities[i].role, entities[i].bbox);
  }
  return out;
}

std::string serialize_answer(std::span<const Entity> entities) {
  std::string out;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (i > 0) out += ", ";
    append_entity(out, entities[i].role, entities[i].bbox);
  }
  return out;
}

std::string serialize_completion(const ParsedCompletion& parsed) {
  std::string out;
  out += kThinkOpen;
  if (parsed.think_text) out += *parsed.think_text;
  out += kThinkClose;
  out += ' ';
  out += kAnswerOpen;
  out += serialize_answer(parsed.entities);
  out += kAnswerClose;
  return out;
}

std::string canonical_completion(std::string_view think_text,
                                 std::span<const Entity> entities) {
  std::string out;
  out += kThinkOpen;
  out += think_text;
  out += kThinkClose;
  out += ' ';
  out += kAnswerOpen;
  out += serialize_answer(entities);
  out += kAnswerClose;
  return out;
}

}  // namespace groundrl
