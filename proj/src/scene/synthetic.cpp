// SPDX-License-Identifier: Apache-2.0

#include "scenechat/scene/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"

namespace scenechat::scene {
namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kPlacementGap = 0.05;
constexpr double kPlaneThickness = 0.02;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Box {
  Vec3 lo;
  Vec3 hi;
};

bool overlaps(const Box& a, const Box& b) {
  for (int k = 0; k < 3; ++k) {
    if (a.hi[k] + kPlacementGap <= b.lo[k] || b.hi[k] + kPlacementGap <= a.lo[k]) return false;
  }
  return true;
}

Vec3 jitter_size(const CategorySpec& cat, Rng& rng) {
  if (cat.shape == Archetype::kSphere) {
    const double s = rng.uniform(0.85, 1.15);
    return {cat.base_size[0] * s, cat.base_size[1] * s, cat.base_size[2] * s};
  }
  Vec3 out{};
  for (int k = 0; k < 3; ++k) out[k] = cat.base_size[k] * rng.uniform(0.85, 1.15);
  return out;
}

Box nominal_box(const CategorySpec& cat, const Vec3& center, const Vec3& size) {
  Vec3 half{size[0] / 2, size[1] / 2, size[2] / 2};
  if (cat.shape == Archetype::kPlane) half[1] = std::max(half[1], kPlaneThickness / 2);
  return {{center[0] - half[0], center[1] - half[1], center[2] - half[2]},
          {center[0] + half[0], center[1] + half[1], center[2] + half[2]}};
}

Vec3 sample_center(const CategorySpec& cat, const Vec3& size, const Vec3& room, Rng& rng) {
  Vec3 c{};
  for (int k = 0; k < 2; ++k) {
    const double half = std::max(0.0, room[k] / 2 - size[k] / 2);
    c[k] = rng.uniform(-half, half);
  }
  if (cat.wall_mounted) {
    const double lo = std::min(1.0, room[2] - size[2] / 2);
    const double hi = std::max(lo, std::min(2.2, room[2] - size[2] / 2));
    c[2] = rng.uniform(lo, hi);
  } else {
    c[2] = size[2] / 2;
  }
  return c;
}

Vec3 object_color(const CategorySpec& cat, Rng& rng) {
  const std::string& name = cat.colors.empty() ? color_names().front().name : cat.colors[rng.index(cat.colors.size())];
  const Vec3& base = color_rgb(name);
  return {clamp01(base[0] + rng.normal(0.0, 0.03)), clamp01(base[1] + rng.normal(0.0, 0.03)),
          clamp01(base[2] + rng.normal(0.0, 0.03))};
}

}  // namespace

const std::vector<NamedColor>& color_names() {
  static const std::vector<NamedColor> kColors = {
      {"red", {0.80, 0.12, 0.12}},   {"green", {0.15, 0.60, 0.20}}, {"blue", {0.12, 0.22, 0.80}},
      {"white", {0.92, 0.92, 0.90}}, {"black", {0.08, 0.08, 0.08}}, {"brown", {0.50, 0.30, 0.12}},
      {"gray", {0.50, 0.50, 0.52}},  {"yellow", {0.90, 0.80, 0.12}},
  };
  return kColors;
}

const std::string& nearest_color_name(const Vec3& rgb) {
  const auto& colors = color_names();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < colors.size(); ++i) {
    const double d = distance(rgb, colors[i].rgb);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return colors[best].name;
}

const Vec3& color_rgb(const std::string& name) {
  for (const auto& c : color_names()) {
    if (c.name == name) return c.rgb;
  }
  throw NotFound("unknown color name " + name);
}

const std::vector<CategorySpec>& default_palette() {
  static const std::vector<CategorySpec> kPalette = {
      {"chair", Archetype::kBox, {0.50, 0.50, 0.90}, {"brown", "black", "red"}, false, "sitting"},
      {"table", Archetype::kBox, {1.40, 0.80, 0.75}, {"brown", "white", "black"}, false, "placing things on"},
      {"cabinet", Archetype::kBox, {0.80, 0.45, 1.80}, {"white", "brown", "gray"}, false, "storing things"},
      {"bed", Archetype::kBox, {2.00, 1.60, 0.55}, {"white", "blue", "gray"}, false, "sleeping"},
      {"lamp", Archetype::kCylinder, {0.30, 0.30, 1.50}, {"yellow", "white", "black"}, false, "lighting the room"},
      {"trash can", Archetype::kCylinder, {0.35, 0.35, 0.60}, {"gray", "black", "green"}, false, "holding waste"},
      {"pillow", Archetype::kSphere, {0.45, 0.45, 0.45}, {"red", "blue", "yellow", "green"}, false,
       "resting your head"},
      {"picture", Archetype::kPlane, {0.90, 0.00, 0.70}, {"red", "blue", "green", "yellow"}, true,
       "decorating the room"},
  };
  return kPalette;
}

const CategorySpec* find_category(const std::vector<CategorySpec>& palette, const std::string& name) {
  for (const auto& c : palette) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

void SyntheticSceneSpec::validate() const {
  if (num_objects < 2 || num_objects > 32) throw InvalidInput(describe() + ": num_objects must be in [2, 32]");
  if (category_palette.empty()) throw InvalidInput(describe() + ": empty category palette");
  for (double e : room_extent) {
    if (!(e > 0.0)) throw InvalidInput(describe() + ": room extent must be positive");
  }
  if (points_per_object < static_cast<int>(kMinPointsPerObject)) {
    throw InvalidInput(describe() + ": points_per_object must be at least 8");
  }
}

std::string SyntheticSceneSpec::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "SyntheticSceneSpec{id=%s, seed=%llu, num_objects=%d, room=(%g,%g,%g)}",
                scene_id.c_str(), static_cast<unsigned long long>(seed), num_objects, room_extent[0],
                room_extent[1], room_extent[2]);
  return buf;
}

PointCloud sample_archetype(Archetype shape, const Vec3& center, const Vec3& size, const Vec3& rgb, int points,
                            std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(points));
  cloud.colors.reserve(static_cast<std::size_t>(points));
  const double hx = size[0] / 2;
  const double hy = size[1] / 2;
  const double hz = size[2] / 2;
  for (int i = 0; i < points; ++i) {
    Vec3 p{};
    switch (shape) {
      case Archetype::kBox: {
        const double axy = size[0] * size[1];
        const double axz = size[0] * size[2];
        const double ayz = size[1] * size[2];
        const double pick = rng.uniform() * (axy + axz + ayz);
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double u = rng.uniform(-1.0, 1.0);
        const double v = rng.uniform(-1.0, 1.0);
        if (pick < axy) {
          p = {u * hx, v * hy, sign * hz};
        } else if (pick < axy + axz) {
          p = {u * hx, sign * hy, v * hz};
        } else {
          p = {sign * hx, u * hy, v * hz};
        }
        break;
      }
      case Archetype::kSphere: {
        double x = 0, y = 0, z = 0, n = 0;
        while (n < 1e-9) {
          x = rng.normal();
          y = rng.normal();
          z = rng.normal();
          n = std::sqrt(x * x + y * y + z * z);
        }
        p = {hx * x / n, hy * y / n, hz * z / n};
        break;
      }
      case Archetype::kCylinder: {
        const double lateral = std::numbers::pi * (hx + hy) * size[2];
        const double caps = 2.0 * std::numbers::pi * hx * hy;
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (rng.uniform() * (lateral + caps) < lateral) {
          p = {hx * std::cos(theta), hy * std::sin(theta), rng.uniform(-hz, hz)};
        } else {
          const double r = std::sqrt(rng.uniform());
          p = {hx * r * std::cos(theta), hy * r * std::sin(theta), rng.uniform() < 0.5 ? -hz : hz};
        }
        break;
      }
      case Archetype::kPlane:
        p = {rng.uniform(-hx, hx), 0.0, rng.uniform(-hz, hz)};
        break;
    }
    cloud.points.push_back({center[0] + p[0], center[1] + p[1], center[2] + p[2]});
    cloud.colors.push_back({clamp01(rgb[0] + rng.normal(0.0, 0.03)), clamp01(rgb[1] + rng.normal(0.0, 0.03)),
                            clamp01(rgb[2] + rng.normal(0.0, 0.03))});
  }
  return cloud;
}

SceneRecord generate_synthetic_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SceneRecord scene;
  scene.scene_id = spec.scene_id;
  std::vector<Box> placed;
  for (int id = 0; id < spec.num_objects; ++id) {
    const CategorySpec& cat = spec.category_palette[rng.index(spec.category_palette.size())];
    const Vec3 size = jitter_size(cat, rng);
    const Vec3 rgb = object_color(cat, rng);
    bool ok = false;
    Vec3 center{};
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
      center = sample_center(cat, size, spec.room_extent, rng);
      const Box box = nominal_box(cat, center, size);
      ok = std::none_of(placed.begin(), placed.end(), [&](const Box& b) { return overlaps(box, b); });
      if (ok) placed.push_back(box);
    }
    if (!ok) throw Error("scene too crowded: could not place object " + std::to_string(id) + " for " + spec.describe());
    PointCloud cloud = sample_archetype(cat.shape, center, size, rgb, spec.points_per_object, rng.next());
    scene.objects.push_back(make_object(id, cat.name, std::move(cloud)));
  }
  return scene;
}

std::vector<ObjectRecord> generate_labeled_objects(const std::vector<CategorySpec>& palette, int per_category,
                                                   std::uint64_t seed, const Vec3& room_extent,
                                                   int points_per_object) {
  Rng rng(seed);
  std::vector<ObjectRecord> out;
  int id = 0;
  for (const auto& cat : palette) {
    for (int i = 0; i < per_category; ++i) {
      const Vec3 size = jitter_size(cat, rng);
      const Vec3 rgb = object_color(cat, rng);
      const Vec3 center = sample_center(cat, size, room_extent, rng);
      out.push_back(make_object(id++, cat.name,
                                sample_archetype(cat.shape, center, size, rgb, points_per_object, rng.next())));
    }
  }
  return out;
}

std::vector<SceneRecord> generate_scene_set(const SceneSetSpec& spec) {
  std::vector<SceneRecord> scenes;
  Rng rng(spec.seed);
  for (int i = 0; i < spec.count; ++i) {
    SyntheticSceneSpec s;
    s.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(i));
    s.num_objects = rng.range(spec.min_objects, spec.max_objects);
    s.room_extent = spec.room_extent;
    s.points_per_object = spec.points_per_object;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%04d", spec.id_prefix.c_str(), i);
    s.scene_id = buf;
    scenes.push_back(generate_synthetic_scene(s));
  }
  return scenes;
}

}  // namespace scenechat::scene
