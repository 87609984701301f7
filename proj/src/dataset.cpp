#include "groundrl/dataset.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace groundrl {

namespace {

using nlohmann::json;

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";

const std::set<std::string>& known_fields() {
  static const std::set<std::string> fields = {
      "id",         "image_id", "image_width", "image_height",
      "expression", "entities", "cot",         "split"};
  return fields;
}

struct RecordIssue {
  ValidationCode code;
  std::string message;
};

struct RawEntity {
  EntityRole role;
  double x1, y1, x2, y2;
};

bool is_blank(std::string_view s) {
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::optional<int> positive_int(const json& j) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) return std::nullopt;
  const auto v = j.get<long long>();
  if (v <= 0 || v > 1'000'000'000) return std::nullopt;
  return static_cast<int>(v);
}

std::optional<std::string> read_string(const json& record, const char* key,
                                       std::string& why) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    why = std::string("field '") + key + "' must be a string";
    return std::nullopt;
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view validation_code_name(ValidationCode code) {
  switch (code) {
    case ValidationCode::MissingSubject: return "MissingSubject";
    case ValidationCode::MultipleSubjects: return "MultipleSubjects";
    case ValidationCode::NoObjects: return "NoObjects";
    case ValidationCode::BoxOutOfBounds: return "BoxOutOfBounds";
    case ValidationCode::DegenerateBox: return "DegenerateBox";
    case ValidationCode::BadCotTags: return "BadCotTags";
    case ValidationCode::MalformedRecord: return "MalformedRecord";
  }
  return "Unknown";
}

std::optional<std::string> cot_body(std::string_view cot_text) {
  while (!cot_text.empty() && std::isspace(static_cast<unsigned char>(cot_text.front()))) {
    cot_text.remove_prefix(1);
  }
  while (!cot_text.empty() && std::isspace(static_cast<unsigned char>(cot_text.back()))) {
    cot_text.remove_suffix(1);
  }
  if (cot_text.size() < kThinkOpen.size() + kThinkClose.size()) return std::nullopt;
  if (!cot_text.starts_with(kThinkOpen) || !cot_text.ends_with(kThinkClose)) {
    return std::nullopt;
  }
  const std::string_view body = cot_text.substr(
      kThinkOpen.size(), cot_text.size() - kThinkOpen.size() - kThinkClose.size());
  if (body.find(kThinkOpen) != std::string_view::npos ||
      body.find(kThinkClose) != std::string_view::npos || is_blank(body)) {
    return std::nullopt;
  }
  return std::string(body);
}

bool validate_cot(std::string_view cot_text) {
  return cot_body(cot_text).has_value();
}

LoadedDataset read_dataset(std::istream& in) {
  LoadedDataset out;
  std::set<std::string> seen_ids;
  std::map<std::string, std::size_t> image_occurrences;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;

    std::vector<RecordIssue> issues;
    auto malformed = [&](std::string message) {
      ++out.report.rejected;
      out.report.errors.push_back(
          {line_no, ValidationCode::MalformedRecord, std::move(message)});
    };

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      malformed(std::string("invalid JSON: ") + e.what());
      continue;
    }
    if (!record.is_object()) {
      malformed("record is not a JSON object");
      continue;
    }

    std::string why;
    const auto image_id = read_string(record, "image_id", why);
    const auto expression = image_id ? read_string(record, "expression", why)
                                     : std::nullopt;
    if (!image_id || !expression) {
      malformed(why);
      continue;
    }
    std::optional<int> width;
    std::optional<int> height;
    if (record.contains("image_width")) width = positive_int(record["image_width"]);
    if (record.contains("image_height")) height = positive_int(record["image_height"]);
    if (!width || !height) {
      malformed("image_width and image_height must be positive integers");
      continue;
    }

    std::optional<Split> split;
    if (const auto it = record.find("split"); it != record.end() && it->is_string()) {
      split = parse_split(it->get<std::string>());
    }
    if (!split) {
      malformed("split must be \"train\" or \"test\"");
      continue;
    }

    std::optional<std::string> cot;
    if (const auto it = record.find("cot"); it != record.end() && !it->is_null()) {
      if (!it->is_string()) {
        malformed("cot must be a string or null");
        continue;
      }
      cot = it->get<std::string>();
    }

    std::string id;
    if (const auto it = record.find("id"); it != record.end()) {
      if (!it->is_string() || it->get<std::string>().empty()) {
        malformed("id must be a non-empty string");
        continue;
      }
      id = it->get<std::string>();
    } else {
      id = *image_id + "#" + std::to_string(image_occurrences[*image_id]);
    }
    if (seen_ids.contains(id)) {
      malformed("duplicate instance id '" + id + "'");
      continue;
    }

    const auto entities_it = record.find("entities");
    if (entities_it == record.end() || !entities_it->is_array()) {
      malformed("entities must be an array");
      continue;
    }
    std::vector<RawEntity> raw;
    bool bad_entity = false;
    for (const json& e : *entities_it) {
      const auto role_it = e.is_object() ? e.find("role") : e.end();
      const auto bbox_it = e.is_object() ? e.find("bbox") : e.end();
      if (!e.is_object() || role_it == e.end() || !role_it->is_string() ||
          bbox_it == e.end() || !bbox_it->is_array() || bbox_it->size() != 4) {
        bad_entity = true;
        break;
      }
      const auto role = parse_role(role_it->get<std::string>());
      if (!role) {
        bad_entity = true;
        break;
      }
      double c[4];
      for (std::size_t k = 0; k < 4; ++k) {
        const json& v = (*bbox_it)[k];
        if (!v.is_number()) {
          bad_entity = true;
          break;
        }
        c[k] = v.get<double>();
      }
      if (bad_entity) break;
      raw.push_back({*role, c[0], c[1], c[2], c[3]});
    }
    if (bad_entity) {
      malformed("each entity needs a subject/object role and a 4-number bbox");
      continue;
    }

    std::size_t subjects = 0;
    std::size_t objects = 0;
    bool out_of_bounds = false;
    bool degenerate = false;
    for (const RawEntity& e : raw) {
      (e.role == EntityRole::Subject ? subjects : objects) += 1;
      for (double v : {e.x1, e.y1, e.x2, e.y2}) {
        if (!std::isfinite(v) || v < 0.0) out_of_bounds = true;
      }
      if (e.x1 > *width || e.x2 > *width || e.y1 > *height || e.y2 > *height) {
        out_of_bounds = true;
      }
      if (!(e.x1 < e.x2) || !(e.y1 < e.y2)) degenerate = true;
    }
    if (subjects == 0) {
      issues.push_back({ValidationCode::MissingSubject, "no subject entity"});
    }
    if (subjects > 1) {
      issues.push_back({ValidationCode::MultipleSubjects,
                        std::to_string(subjects) + " subject entities"});
    }
    if (objects == 0) {
      issues.push_back({ValidationCode::NoObjects, "no object entity"});
    }
    if (out_of_bounds) {
      issues.push_back({ValidationCode::BoxOutOfBounds,
                        "bbox outside [0, image_width] x [0, image_height]"});
    }
    if (degenerate) {
      issues.push_back({ValidationCode::DegenerateBox, "bbox with x1 >= x2 or y1 >= y2"});
    }
    if (cot && !validate_cot(*cot)) {
      issues.push_back({ValidationCode::BadCotTags,
                        "cot must be a single non-empty <think>...</think> block"});
    }

    seen_ids.insert(id);
    ++image_occurrences[*image_id];
    if (!issues.empty()) {
      ++out.report.rejected;
      for (RecordIssue& issue : issues) {
        out.report.errors.push_back({line_no, issue.code, std::move(issue.message)});
      }
      continue;
    }

    std::vector<Entity> entities;
    entities.reserve(raw.size());
    for (const RawEntity& e : raw) {
      entities.push_back({e.role, BoundingBox(e.x1, e.y1, e.x2, e.y2)});
    }
    std::map<std::string, std::string> extras;
    for (const auto& [key, value] : record.items()) {
      if (!known_fields().contains(key)) extras.emplace(key, value.dump());
    }
    out.instances.push_back(
        GroundingInstance(std::move(id), *image_id, *width, *height, *expression,
                          std::move(entities), std::move(cot), *split)
            .with_extras(std::move(extras)));
    ++out.report.accepted;
  }
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetFileError("cannot open dataset file: " + path.string());
  return read_dataset(in);
}

std::string instance_to_json_line(const GroundingInstance& instance) {
  nlohmann::ordered_json record;
  record["id"] = instance.id();
  record["image_id"] = instance.image_id();
  record["image_width"] = instance.image_width();
  record["image_height"] = instance.image_height();
  record["expression"] = instance.expression();
  auto entities = nlohmann::ordered_json::array();
  for (const Entity& e : instance.entities()) {
    entities.push_back({{"role", std::string(role_name(e.role))},
                        {"bbox", {e.bbox.x1(), e.bbox.y1(), e.bbox.x2(), e.bbox.y2()}}});
  }
  record["entities"] = std::move(entities);
  record["cot"] = instance.cot() ? nlohmann::ordered_json(*instance.cot())
                                 : nlohmann::ordered_json(nullptr);
  record["split"] = std::string(split_name(instance.split()));
  for (const auto& [key, value] : instance.extras()) {
    record[key] = nlohmann::ordered_json::parse(value);
  }
  return record.dump();
}

void write_dataset(std::ostream& out, std::span<const GroundingInstance> instances) {
  for (const GroundingInstance& instance : instances) {
    out << instance_to_json_line(instance) << '\n';
  }
}

StatsReport dataset_stats(std::span<const GroundingInstance> instances) {
  StatsReport stats;
  std::set<std::string> images;
  std::set<std::string> train_images;
  std::set<std::string> test_images;
  for (const GroundingInstance& instance : instances) {
    ++stats.total_instances;
    images.insert(instance.image_id());
    if (instance.split() == Split::Train) {
      ++stats.train_instances;
      train_images.insert(instance.image_id());
      if (instance.cot()) ++stats.cot_annotated;
    } else {
      ++stats.test_instances;
      test_images.insert(instance.image_id());
    }
    ++stats.objects_per_instance[instance.object_count()];
  }
  stats.total_images = images.size();
  stats.train_images = train_images.size();
  stats.test_images = test_images.size();
  return stats;
}

RewardConfig reward_config_from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("reward config is not valid JSON: ") +
                                e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("reward config must be a JSON object");

  RewardConfig config;
  const std::map<std::string, double*> scalars = {
      {"lambda1", &config.lambda1},
      {"lambda2", &config.lambda2},
      {"alpha_subject", &config.alpha_subject},
      {"alpha_object", &config.alpha_object},
      {"beta1", &config.beta1},
      {"beta2", &config.beta2},
      {"match_threshold", &config.match_threshold},
  };
  for (const auto& [key, value] : j.items()) {
    if (const auto it = scalars.find(key); it != scalars.end()) {
      if (!value.is_number()) throw std::invalid_argument(key + " must be a number");
      *it->second = value.get<double>();
    } else if (key == "iou_tiers") {
      if (!value.is_array()) throw std::invalid_argument("iou_tiers must be an array");
      config.iou_tiers.clear();
      for (const json& tier : value) {
        if (!tier.is_array() || tier.size() != 2 || !tier[0].is_number() ||
            !tier[1].is_number()) {
          throw std::invalid_argument("each IoU tier must be [threshold, score]");
        }
        config.iou_tiers.push_back({tier[0].get<double>(), tier[1].get<double>()});
      }
    } else {
      throw std::invalid_argument("unknown reward config key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

RewardConfig load_reward_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetFileError("cannot open reward config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return reward_config_from_json(buf.str());
}

}  // namespace groundrl
