#include "groundrl/protocol.hpp"

#include <cctype>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "groundrl/reward.hpp"

namespace groundrl {

namespace {

using ordered_json = nlohmann::ordered_json;

bool blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

void add_breakdown_fields(ordered_json& j, const RewardBreakdown& b) {
  j["r_fmt"] = b.r_fmt;
  j["r_ent"] = b.r_ent;
  j["r_rel"] = b.r_rel;
  j["r_total"] = b.r_total;
}

std::string malformed_reply() {
  return R"({"request_id":null,"error":"malformed_request"})";
}

}  // namespace

CompletionFile read_completion_records(std::istream& in) {
  CompletionFile out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": invalid JSON, skipped");
      continue;
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("completion") || !j["completion"].is_string()) {
      out.warnings.push_back("line " + std::to_string(line_no) +
                             ": expected {\"id\": string, \"completion\": string}, skipped");
      continue;
    }
    out.records.push_back(
        {line_no, j["id"].get<std::string>(), j["completion"].get<std::string>()});
  }
  return out;
}

InstanceIndex index_instances(std::span<const GroundingInstance> instances) {
  InstanceIndex index;
  for (const auto& instance : instances) index.emplace(instance.id(), &instance);
  return index;
}

std::string format_number(double value) { return nlohmann::json(value).dump(); }

std::string score_record_json(std::string_view id, const RewardBreakdown& breakdown) {
  ordered_json j;
  j["id"] = std::string(id);
  add_breakdown_fields(j, breakdown);
  auto pairs = ordered_json::array();
  for (const auto& m : breakdown.matching) {
    pairs.push_back({m.prediction, m.ground_truth, m.iou});
  }
  j["matching"] = std::move(pairs);
  j["unmatched_predictions"] = breakdown.unmatched_predictions;
  return j.dump();
}

std::string score_record_text(std::string_view id, const RewardBreakdown& breakdown) {
  std::ostringstream out;
  out << id << " r_fmt=" << format_number(breakdown.r_fmt)
      << " r_ent=" << format_number(breakdown.r_ent)
      << " r_rel=" << format_number(breakdown.r_rel)
      << " r_total=" << format_number(breakdown.r_total)
      << " matched=" << breakdown.matching.size()
      << " unmatched=" << breakdown.unmatched_predictions.size();
  return out.str();
}

std::string metrics_text(const MetricsReport& report, bool verbose) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "threshold: " << report.threshold << '\n'
      << "acc_sub: " << report.acc_sub << '\n'
      << "acc_obj: " << report.acc_obj << '\n'
      << "macc_micro: " << report.macc_micro << '\n'
      << "macc_macro: " << report.macc_macro << '\n'
      << "instances: " << report.instances << '\n'
      << "subject_hits: " << report.subject_hits << '\n'
      << "object_hits: " << report.object_hits << '\n'
      << "object_total: " << report.object_total << '\n';
  if (verbose) {
    for (const auto& r : report.per_instance) {
      out << "instance " << r.id << ": subject_hit=" << r.hits.subject_hit
          << " object_hits=" << r.hits.object_hits << '/' << r.hits.object_total << '\n';
    }
  }
  return out.str();
}

std::string metrics_json(const MetricsReport& report, bool verbose) {
  ordered_json j;
  j["threshold"] = report.threshold;
  j["acc_sub"] = report.acc_sub;
  j["acc_obj"] = report.acc_obj;
  j["macc_micro"] = report.macc_micro;
  j["macc_macro"] = report.macc_macro;
  j["instances"] = report.instances;
  j["subject_hits"] = report.subject_hits;
  j["object_hits"] = report.object_hits;
  j["object_total"] = report.object_total;
  j["unknown_ids"] = report.unknown_ids;
  if (verbose) {
    auto rows = ordered_json::array();
    for (const auto& r : report.per_instance) {
      rows.push_back({{"id", r.id},
                      {"subject_hit", r.hits.subject_hit},
                      {"object_hits", r.hits.object_hits},
                      {"object_total", r.hits.object_total}});
    }
    j["per_instance"] = std::move(rows);
  }
  return j.dump();
}

ServeReply handle_serve_line(std::string_view line, const InstanceIndex& index,
                             const RewardConfig& config) {
  ServeReply reply;
  if (blank(line)) return reply;

  nlohmann::json request;
  try {
    request = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    reply.response = malformed_reply();
    return reply;
  }
  if (!request.is_object()) {
    reply.response = malformed_reply();
    return reply;
  }
  if (const auto it = request.find("shutdown");
      it != request.end() && it->is_boolean() && it->get<bool>()) {
    reply.shutdown = true;
    return reply;
  }
  const auto id = request.find("request_id");
  const auto instance_id = request.find("instance_id");
  const auto completion = request.find("completion");
  if (id == request.end() || instance_id == request.end() || !instance_id->is_string() ||
      completion == request.end() || !completion->is_string()) {
    reply.response = malformed_reply();
    return reply;
  }

  ordered_json response;
  response["request_id"] = *id;
  const auto found = index.find(instance_id->get<std::string>());
  if (found == index.end()) {
    response["error"] = "unknown_instance";
  } else {
    const RewardBreakdown b =
        total_reward(completion->get<std::string>(), *found->second, config);
    add_breakdown_fields(response, b);
  }
  reply.response = response.dump();
  return reply;
}

void serve_loop(std::istream& in, std::ostream& out, const InstanceIndex& index,
                const RewardConfig& config) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const ServeReply reply = handle_serve_line(line, index, config);
    if (reply.shutdown) break;
    if (reply.response) out << *reply.response << '\n' << std::flush;
  }
}

}  // namespace groundrl
