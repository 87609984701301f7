#ifndef GROUNDRL_DATASET_HPP_
#define GROUNDRL_DATASET_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "groundrl/domain.hpp"

namespace groundrl {

// Dataset files are UTF-8, one JSON object per line:
//   {"id": "...", "image_id": "...", "image_width": 800, "image_height": 800,
//    "expression": "...", "entities": [{"role": "subject",
//    "bbox": [x1, y1, x2, y2]}, ...], "cot": "<think>...</think>" | null,
//    "split": "train" | "test"}
// "id" is optional; without it the instance id is "<image_id>#<n>", n
// counting earlier records of the same image. Unknown fields survive a
// load/save cycle. Blank lines are ignored.

enum class ValidationCode {
  MissingSubject,
  MultipleSubjects,
  NoObjects,
  BoxOutOfBounds,
  DegenerateBox,
  BadCotTags,
  MalformedRecord,
};

std::string_view validation_code_name(ValidationCode code);

struct ValidationError {
  std::size_t line;  // 1-based
  ValidationCode code;
  std::string message;
};

struct ValidationReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<ValidationError> errors;

  std::size_t total() const { return accepted + rejected; }
};

struct LoadedDataset {
  std::vector<GroundingInstance> instances;
  ValidationReport report;
};

class DatasetFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws DatasetFileError when the file cannot be opened; bad records are
// reported and skipped.
LoadedDataset load_dataset(const std::filesystem::path& path);
LoadedDataset read_dataset(std::istream& in);

void write_dataset(std::ostream& out, std::span<const GroundingInstance> instances);
std::string instance_to_json_line(const GroundingInstance& instance);

// True iff the text is a single balanced <think>...</think> block with
// non-blank content and no nested tags.
bool validate_cot(std::string_view cot_text);

// Interior of a valid think block, or nullopt.
std::optional<std::string> cot_body(std::string_view cot_text);

struct StatsReport {
  std::size_t total_images = 0;
  std::size_t total_instances = 0;
  std::size_t train_instances = 0;
  std::size_t test_instances = 0;
  std::size_t train_images = 0;
  std::size_t test_images = 0;
  // Training instances carrying a think trace.
  std::size_t cot_annotated = 0;
  std::map<std::size_t, std::size_t> objects_per_instance;
};

StatsReport dataset_stats(std::span<const GroundingInstance> instances);

// Reward configuration file: a JSON object whose keys override the
// RewardConfig defaults (lambda1, lambda2, alpha_subject, alpha_object,
// beta1, beta2, match_threshold, iou_tiers as [[threshold, score], ...]).
// Throws std::invalid_argument on unknown keys or invalid values.
RewardConfig reward_config_from_json(std::string_view json_text);
RewardConfig load_reward_config(const std::filesystem::path& path);

}  // namespace groundrl

#endif  // GROUNDRL_DATASET_HPP_
