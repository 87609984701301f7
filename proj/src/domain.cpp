#include "groundrl/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace groundrl {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

bool BoundingBox::valid(double x1, double y1, double x2, double y2) noexcept {
  for (double v : {x1, y1, x2, y2}) {
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return x1 < x2 && y1 < y2;
}

BoundingBox::BoundingBox(double x1, double y1, double x2, double y2)
    : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!valid(x1, y1, x2, y2)) {
    throw std::invalid_argument(
        "bounding box needs finite non-negative coordinates with x1 < x2 and "
        "y1 < y2");
  }
}

std::optional<BoundingBox> BoundingBox::make(double x1, double y1, double x2,
                                             double y2) noexcept {
  if (!valid(x1, y1, x2, y2)) return std::nullopt;
  return BoundingBox(Unchecked{}, x1, y1, x2, y2);
}

BoundingBox BoundingBox::translated(double dx, double dy) const {
  return BoundingBox(x1_ + dx, y1_ + dy, x2_ + dx, y2_ + dy);
}

std::string_view role_name(EntityRole role) {
  return role == EntityRole::Subject ? "subject" : "object";
}

std::optional<EntityRole> parse_role(std::string_view text) {
  if (iequals(text, "subject")) return EntityRole::Subject;
  if (iequals(text, "object")) return EntityRole::Object;
  return std::nullopt;
}

std::string_view split_name(Split split) {
  return split == Split::Train ? "train" : "test";
}

std::optional<Split> parse_split(std::string_view text) {
  if (iequals(text, "train")) return Split::Train;
  if (iequals(text, "test")) return Split::Test;
  return std::nullopt;
}

GroundingInstance::GroundingInstance(std::string id, std::string image_id,
                                     int image_width, int image_height,
                                     std::string expression,
                                     std::vector<Entity> entities,
                                     std::optional<std::string> cot,
                                     Split split)
    : id_(std::move(id)),
      image_id_(std::move(image_id)),
      image_width_(image_width),
      image_height_(image_height),
      expression_(std::move(expression)),
      entities_(std::move(entities)),
      cot_(std::move(cot)),
      split_(split) {
  if (image_width_ <= 0 || image_height_ <= 0) {
    throw std::invalid_argument("image dimensions must be positive");
  }
  const auto subjects = std::count_if(
      entities_.begin(), entities_.end(),
      [](const Entity& e) { return e.role == EntityRole::Subject; });
  if (subjects != 1) {
    throw std::invalid_argument("instance needs exactly one subject entity");
  }
  if (entities_.size() < 2) {
    throw std::invalid_argument("instance needs at least one object entity");
  }
  for (const Entity& e : entities_) {
    if (e.bbox.x2() > image_width_ || e.bbox.y2() > image_height_) {
      throw std::invalid_argument("entity box lies outside the image");
    }
  }
  std::stable_partition(entities_.begin(), entities_.end(), [](const Entity& e) {
    return e.role == EntityRole::Subject;
  });
}

GroundingInstance GroundingInstance::with_extras(
    std::map<std::string, std::string> extras) const {
  GroundingInstance copy = *this;
  copy.extras_ = std::move(extras);
  return copy;
}

void RewardConfig::validate() const {
  for (double w : {lambda1, lambda2, alpha_subject, alpha_object, beta1, beta2}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("reward weights and bonuses must be >= 0");
    }
  }
  if (!(match_threshold >= 0.0 && match_threshold <= 1.0)) {
    throw std::invalid_argument("match_threshold must lie in [0, 1]");
  }
  for (std::size_t i = 0; i < iou_tiers.size(); ++i) {
    const IouTier& t = iou_tiers[i];
    if (!(t.threshold >= 0.0 && t.threshold <= 1.0 && t.score >= 0.0 &&
          t.score <= 1.0)) {
      throw std::invalid_argument("IoU tier values must lie in [0, 1]");
    }
    if (i > 0 && !(t.threshold < iou_tiers[i - 1].threshold &&
                   t.score < iou_tiers[i - 1].score)) {
      throw std::invalid_argument("IoU tiers must be strictly decreasing");
    }
  }
}

RewardConfig RewardConfig::grpo_only() {
  RewardConfig config;
  config.lambda1 = 0.5;
  config.lambda2 = 0.5;
  return config;
}

}  // namespace groundrl
