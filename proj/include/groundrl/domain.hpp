#ifndef GROUNDRL_DOMAIN_HPP_
#define GROUNDRL_DOMAIN_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace groundrl {

// Axis-aligned pixel-space rectangle. (x1, y1) is the top-left corner and
// (x2, y2) the bottom-right one, y growing downward. Coordinates are real
// valued; construction enforces finite, non-negative coordinates and a
// strictly positive area.
class BoundingBox {
 public:
  // Throws std::invalid_argument when the invariants do not hold.
  BoundingBox(double x1, double y1, double x2, double y2);

  // Same checks, but reports failure instead of throwing.
  static std::optional<BoundingBox> make(double x1, double y1, double x2,
                                         double y2) noexcept;
  static bool valid(double x1, double y1, double x2, double y2) noexcept;

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }

  // Both boxes shifted by (dx, dy); throws if the result leaves the valid
  // domain.
  BoundingBox translated(double dx, double dy) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

 private:
  struct Unchecked {};
  BoundingBox(Unchecked, double x1, double y1, double x2, double y2) noexcept
      : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {}

  double x1_;
  double y1_;
  double x2_;
  double y2_;
};

enum class EntityRole { Subject, Object };

std::string_view role_name(EntityRole role);
// Case-insensitive; returns nullopt for anything but subject/object.
std::optional<EntityRole> parse_role(std::string_view text);

struct Entity {
  EntityRole role;
  BoundingBox bbox;

  friend bool operator==(const Entity&, const Entity&) = default;
};

enum class Split { Train, Test };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view text);

// One image-expression pair with exactly one subject followed by one or more
// objects, all lying inside the image.
class GroundingInstance {
 public:
  // Throws std::invalid_argument on any violated invariant. Entities are
  // reordered to subject-first, objects kept in annotation order.
  GroundingInstance(std::string id, std::string image_id, int image_width,
                    int image_height, std::string expression,
                    std::vector<Entity> entities, std::optional<std::string> cot,
                    Split split);

  const std::string& id() const { return id_; }
  const std::string& image_id() const { return image_id_; }
  int image_width() const { return image_width_; }
  int image_height() const { return image_height_; }
  const std::string& expression() const { return expression_; }
  const std::vector<Entity>& entities() const { return entities_; }
  const std::optional<std::string>& cot() const { return cot_; }
  Split split() const { return split_; }

  const Entity& subject() const { return entities_.front(); }
  std::size_t object_count() const { return entities_.size() - 1; }

  // Unknown record fields, kept verbatim (serialized JSON values) so that a
  // load/save cycle does not drop them.
  const std::map<std::string, std::string>& extras() const { return extras_; }
  GroundingInstance with_extras(std::map<std::string, std::string> extras) const;

  friend bool operator==(const GroundingInstance&,
                         const GroundingInstance&) = default;

 private:
  std::string id_;
  std::string image_id_;
  int image_width_;
  int image_height_;
  std::string expression_;
  std::vector<Entity> entities_;
  std::optional<std::string> cot_;
  Split split_;
  std::map<std::string, std::string> extras_;
};

// Half-open byte range [begin, end) into the text that was parsed.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ParsedEntity {
  EntityRole role;
  BoundingBox bbox;
  SourceSpan source_span;

  friend bool operator==(const ParsedEntity&, const ParsedEntity&) = default;
};

struct ParsedCompletion {
  bool structural_ok = false;
  // Present only when structural_ok.
  std::optional<std::string> think_text;
  std::vector<ParsedEntity> entities;
  int malformed_segment_count = 0;

  friend bool operator==(const ParsedCompletion&,
                         const ParsedCompletion&) = default;
};

struct IouTier {
  double threshold;
  double score;
};

struct RewardConfig {
  double lambda1 = 0.3;
  double lambda2 = 0.3;
  double alpha_subject = 1.5;
  double alpha_object = 1.25;
  double beta1 = 0.3;
  double beta2 = 0.3;
  std::vector<IouTier> iou_tiers = {{0.75, 1.0}, {0.5, 0.8}, {0.25, 0.4}};
  double match_threshold = 0.25;

  // Throws std::invalid_argument when weights are negative or the tier table
  // is not strictly decreasing in both columns within [0, 1].
  void validate() const;

  // Format weights raised by 0.2 each, used when training without a
  // supervised cold start.
  static RewardConfig grpo_only();
};

struct EntityMatch {
  std::size_t prediction;
  std::size_t ground_truth;
  double iou;

  friend bool operator==(const EntityMatch&, const EntityMatch&) = default;
};

struct Matching {
  std::vector<EntityMatch> pairs;
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_ground_truths;

  friend bool operator==(const Matching&, const Matching&) = default;
};

struct RewardBreakdown {
  double r_fmt = 0.0;
  double r_ent = 0.0;
  double r_rel = 0.0;
  double r_total = 0.0;
  std::vector<EntityMatch> matching;
  std::vector<std::size_t> unmatched_predictions;
};

}  // namespace groundrl

#endif  // GROUNDRL_DOMAIN_HPP_
