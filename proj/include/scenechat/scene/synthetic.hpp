// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenechat/scene/scene.hpp"

namespace scenechat::scene {

enum class Archetype { kBox, kSphere, kCylinder, kPlane };

struct CategorySpec {
  std::string name;
  Archetype shape = Archetype::kBox;
  /// Nominal bbox extents in meters before per-object jitter.
  Vec3 base_size{};
  /// Names from color_names() this category is drawn in.
  std::vector<std::string> colors;
  /// Hung on a wall (centered between 1 and 2.2 m) instead of standing on the floor.
  bool wall_mounted = false;
  /// Short purpose phrase, e.g. "sitting".
  std::string function;
};

struct NamedColor {
  std::string name;
  Vec3 rgb{};
};

const std::vector<NamedColor>& color_names();
/// Closest named color in RGB space.
const std::string& nearest_color_name(const Vec3& rgb);
const Vec3& color_rgb(const std::string& name);

/// Eight indoor categories over the four archetypes.
const std::vector<CategorySpec>& default_palette();
const CategorySpec* find_category(const std::vector<CategorySpec>& palette, const std::string& name);

struct SyntheticSceneSpec {
  std::uint64_t seed = 0;
  int num_objects = 4;
  std::vector<CategorySpec> category_palette = default_palette();
  Vec3 room_extent{6.0, 6.0, 3.0};
  int points_per_object = 64;
  std::string scene_id = "scene";

  void validate() const;
  std::string describe() const;
};

/// Deterministic scene with pairwise-disjoint object bboxes inside a room
/// centered on the origin (floor at z = 0). Throws Error("scene too crowded
/// ...") when an object cannot be placed within 1000 attempts.
SceneRecord generate_synthetic_scene(const SyntheticSceneSpec& spec);

/// Surface samples of one archetype instance centered at `center`.
PointCloud sample_archetype(Archetype shape, const Vec3& center, const Vec3& size, const Vec3& rgb,
                            int points, std::uint64_t seed);

/// `per_category` standalone objects of every palette category, placed at
/// random positions in a room of `room_extent`, in category-major order.
std::vector<ObjectRecord> generate_labeled_objects(const std::vector<CategorySpec>& palette, int per_category,
                                                   std::uint64_t seed, const Vec3& room_extent,
                                                   int points_per_object);

struct SceneSetSpec {
  int count = 10;
  std::uint64_t seed = 0;
  int min_objects = 3;
  int max_objects = 6;
  int points_per_object = 64;
  Vec3 room_extent{6.0, 6.0, 3.0};
  std::string id_prefix = "scene";
};

/// `count` scenes with ids `<prefix>NNNN`.
std::vector<SceneRecord> generate_scene_set(const SceneSetSpec& spec);

}  // namespace scenechat::scene
