// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

namespace scenechat::scene {

/// x, y, z in meters (z up) or r, g, b in [0, 1].
using Vec3 = std::array<double, 3>;

inline constexpr std::size_t kMinPointsPerObject = 8;
inline constexpr double kAttributeTolerance = 1e-5;

struct PointCloud {
  std::vector<Vec3> points;
  /// Empty, or one color per point.
  std::vector<Vec3> colors;

  bool has_colors() const { return !colors.empty(); }
};

struct Attributes {
  Vec3 color{};
  Vec3 size{};
  Vec3 location{};
};

/// location = per-axis mean of the points, size = per-axis (max - min),
/// color = mean point color or mid-gray when the cloud carries no colors.
Attributes compute_attributes(const PointCloud& cloud);

struct ObjectRecord {
  int id = 0;
  std::string category;
  PointCloud cloud;
  Vec3 color{};
  Vec3 size{};
  Vec3 location{};

  Vec3 bbox_min() const;
  Vec3 bbox_max() const;
};

/// Builds an object whose attributes are derived from its cloud.
ObjectRecord make_object(int id, std::string category, PointCloud cloud);

struct SceneRecord {
  std::string scene_id;
  std::vector<ObjectRecord> objects;

  const ObjectRecord* find(int object_id) const;
  /// Throws NotFound naming the id.
  const ObjectRecord& at(int object_id) const;
  /// Objects other than `target_id`, in scene order.
  std::vector<const ObjectRecord*> others(int target_id) const;
  /// Number of objects with the given category.
  int count_category(const std::string& category) const;
};

/// Throws ValidationError naming the offending invariant.
void validate_cloud(const PointCloud& cloud, const std::string& context);
void validate_object(const ObjectRecord& object);
void validate_scene(const SceneRecord& scene);

double distance(const Vec3& a, const Vec3& b);

}  // namespace scenechat::scene
