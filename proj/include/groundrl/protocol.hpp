#ifndef GROUNDRL_PROTOCOL_HPP_
#define GROUNDRL_PROTOCOL_HPP_

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "groundrl/domain.hpp"
#include "groundrl/evaluation.hpp"

namespace groundrl {

// Line records shared by the CLI commands and the serve loop. All numbers are
// written in shortest round-trip form so that identical inputs give
// byte-identical values across commands.

// Completion/prediction files: one {"id": "...", "completion": "..."} per line.
struct CompletionRecord {
  std::size_t line;
  std::string id;
  std::string completion;
};

struct CompletionFile {
  std::vector<CompletionRecord> records;
  std::vector<std::string> warnings;
};

CompletionFile read_completion_records(std::istream& in);

using InstanceIndex = std::map<std::string, const GroundingInstance*, std::less<>>;
InstanceIndex index_instances(std::span<const GroundingInstance> instances);

// {"id", "r_fmt", "r_ent", "r_rel", "r_total", "matching": [[p, g, iou]...],
//  "unmatched_predictions": [...]}
std::string score_record_json(std::string_view id, const RewardBreakdown& breakdown);
std::string score_record_text(std::string_view id, const RewardBreakdown& breakdown);

// Shortest round-trip decimal of a double, as used in every record.
std::string format_number(double value);

std::string metrics_text(const MetricsReport& report, bool verbose);
std::string metrics_json(const MetricsReport& report, bool verbose);

// Serve protocol. A request line is
//   {"request_id": <any JSON value>, "instance_id": "...", "completion": "..."}
// and is answered by
//   {"request_id": ..., "r_fmt": ..., "r_ent": ..., "r_rel": ..., "r_total": ...}
// or {"request_id": ..., "error": "unknown_instance"}; lines that are not a
// valid request get {"request_id": null, "error": "malformed_request"}.
// {"shutdown": true} ends the session. Blank lines are ignored.
struct ServeReply {
  bool shutdown = false;
  std::optional<std::string> response;
};

ServeReply handle_serve_line(std::string_view line, const InstanceIndex& index,
                             const RewardConfig& config);

// Answers requests in arrival order, flushing after each reply. Returns when
// the shutdown record or end of input is reached.
void serve_loop(std::istream& in, std::ostream& out, const InstanceIndex& index,
                const RewardConfig& config);

}  // namespace groundrl

#endif  // GROUNDRL_PROTOCOL_HPP_
