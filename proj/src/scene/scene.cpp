// SPDX-License-Identifier: Apache-2.0

#include "scenechat/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "scenechat/core/error.hpp"

namespace scenechat::scene {

Attributes compute_attributes(const PointCloud& cloud) {
  if (cloud.points.empty()) throw InvalidInput("compute_attributes: empty point cloud");
  Attributes a;
  Vec3 lo = cloud.points.front();
  Vec3 hi = cloud.points.front();
  Vec3 total{0.0, 0.0, 0.0};
  for (const auto& p : cloud.points) {
    for (int k = 0; k < 3; ++k) {
      total[k] += p[k];
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  }
  const double n = static_cast<double>(cloud.points.size());
  for (int k = 0; k < 3; ++k) {
    a.location[k] = total[k] / n;
    a.size[k] = hi[k] - lo[k];
  }
  if (cloud.has_colors()) {
    Vec3 c{0.0, 0.0, 0.0};
    for (const auto& col : cloud.colors) {
      for (int k = 0; k < 3; ++k) c[k] += col[k];
    }
    const double m = static_cast<double>(cloud.colors.size());
    for (int k = 0; k < 3; ++k) a.color[k] = c[k] / m;
  } else {
    a.color = {0.5, 0.5, 0.5};
  }
  return a;
}

Vec3 ObjectRecord::bbox_min() const {
  Vec3 lo = cloud.points.front();
  for (const auto& p : cloud.points) {
    for (int k = 0; k < 3; ++k) lo[k] = std::min(lo[k], p[k]);
  }
  return lo;
}

Vec3 ObjectRecord::bbox_max() const {
  Vec3 hi = cloud.points.front();
  for (const auto& p : cloud.points) {
    for (int k = 0; k < 3; ++k) hi[k] = std::max(hi[k], p[k]);
  }
  return hi;
}

ObjectRecord make_object(int id, std::string category, PointCloud cloud) {
  ObjectRecord o;
  o.id = id;
  o.category = std::move(category);
  const Attributes a = compute_attributes(cloud);
  o.cloud = std::move(cloud);
  o.color = a.color;
  o.size = a.size;
  o.location = a.location;
  return o;
}

const ObjectRecord* SceneRecord::find(int object_id) const {
  for (const auto& o : objects) {
    if (o.id == object_id) return &o;
  }
  return nullptr;
}

const ObjectRecord& SceneRecord::at(int object_id) const {
  const ObjectRecord* o = find(object_id);
  if (o == nullptr) throw NotFound("object " + std::to_string(object_id) + " not in scene " + scene_id);
  return *o;
}

std::vector<const ObjectRecord*> SceneRecord::others(int target_id) const {
  std::vector<const ObjectRecord*> out;
  for (const auto& o : objects) {
    if (o.id != target_id) out.push_back(&o);
  }
  return out;
}

int SceneRecord::count_category(const std::string& category) const {
  return static_cast<int>(std::count_if(objects.begin(), objects.end(),
                                        [&](const ObjectRecord& o) { return o.category == category; }));
}

void validate_cloud(const PointCloud& cloud, const std::string& context) {
  if (cloud.points.size() < kMinPointsPerObject) {
    throw ValidationError(context + ": needs at least 8 points, has " + std::to_string(cloud.points.size()));
  }
  for (const auto& p : cloud.points) {
    for (double v : p) {
      if (!std::isfinite(v)) throw ValidationError(context + ": non-finite coordinate");
    }
  }
  if (cloud.has_colors()) {
    if (cloud.colors.size() != cloud.points.size()) {
      throw ValidationError(context + ": point_colors length differs from points");
    }
    for (const auto& c : cloud.colors) {
      for (double v : c) {
        if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(context + ": point color outside [0,1]");
      }
    }
  }
}

void validate_object(const ObjectRecord& object) {
  const std::string ctx = "object " + std::to_string(object.id);
  validate_cloud(object.cloud, ctx);
  const Attributes a = compute_attributes(object.cloud);
  for (int k = 0; k < 3; ++k) {
    if (!(std::abs(a.location[k] - object.location[k]) <= kAttributeTolerance)) {
      throw ValidationError(ctx + ": location does not match point centroid");
    }
    if (!(std::abs(a.size[k] - object.size[k]) <= kAttributeTolerance)) {
      throw ValidationError(ctx + ": size does not match point extent");
    }
    if (object.cloud.has_colors() && !(std::abs(a.color[k] - object.color[k]) <= kAttributeTolerance)) {
      throw ValidationError(ctx + ": color does not match mean point color");
    }
    if (!(object.color[k] >= 0.0 && object.color[k] <= 1.0)) throw ValidationError(ctx + ": color outside [0,1]");
  }
  if (object.category.empty()) throw ValidationError(ctx + ": empty category");
}

void validate_scene(const SceneRecord& scene) {
  if (scene.objects.size() < 2) {
    throw ValidationError("scene " + scene.scene_id + ": needs at least 2 objects");
  }
  std::set<int> ids;
  for (const auto& o : scene.objects) {
    if (!ids.insert(o.id).second) {
      throw ValidationError("scene " + scene.scene_id + ": duplicate object_id " + std::to_string(o.id));
    }
    validate_object(o);
  }
}

double distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace scenechat::scene
