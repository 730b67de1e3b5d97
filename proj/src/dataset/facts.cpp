// SPDX-License-Identifier: Apache-2.0

#include "scenechat/dataset/facts.hpp"

#include <algorithm>
#include <cmath>

#include "scenechat/core/error.hpp"
#include "scenechat/scene/synthetic.hpp"

namespace scenechat::dataset {

std::vector<const scene::ObjectRecord*> knn_neighbors(const scene::SceneRecord& scene, int target_id, int k) {
  const scene::ObjectRecord& target = scene.at(target_id);
  std::vector<std::pair<double, const scene::ObjectRecord*>> ranked;
  for (const auto& o : scene.objects) {
    if (o.id == target_id) continue;
    double d2 = 0.0;
    for (int k = 0; k < 3; ++k) d2 += (o.location[k] - target.location[k]) * (o.location[k] - target.location[k]);
    ranked.emplace_back(d2, &o);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second->id < b.second->id;
  });
  std::vector<const scene::ObjectRecord*> out;
  for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < k; ++i) out.push_back(ranked[i].second);
  return out;
}

const std::vector<std::string>& direction_words() {
  static const std::vector<std::string> kWords{"to the right of", "to the left of", "behind", "in front of",
                                               "above", "below"};
  return kWords;
}

std::string direction_word(const scene::ObjectRecord& a, const scene::ObjectRecord& b) {
  int axis = 0;
  double best = -1.0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::abs(a.location[k] - b.location[k]);
    if (d > best) {
      best = d;
      axis = k;
    }
  }
  const bool positive = a.location[axis] - b.location[axis] > 0;
  return direction_words()[static_cast<std::size_t>(2 * axis + (positive ? 0 : 1))];
}

std::string size_word(const scene::ObjectRecord& object) {
  const double m = std::max({object.size[0], object.size[1], object.size[2]});
  if (m < 0.75) return "small";
  if (m < 1.6) return "medium-sized";
  return "large";
}

std::string plural(const std::string& category) { return category + "s"; }

std::string count_phrase(int count, const std::string& category) {
  if (count == 1) return "There is 1 " + category;
  return "There are " + std::to_string(count) + " " + plural(category);
}

std::string color_word(const scene::ObjectRecord& object) { return scene::nearest_color_name(object.color); }

std::string room_position(const scene::SceneRecord& scene, const scene::ObjectRecord& object) {
  double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
  for (const auto& o : scene.objects) {
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], o.bbox_min()[k]);
      hi[k] = std::max(hi[k], o.bbox_max()[k]);
    }
  }
  double rel[2];
  for (int k = 0; k < 2; ++k) {
    const double span = std::max(hi[k] - lo[k], 1e-6);
    rel[k] = (object.location[k] - lo[k]) / span;
  }
  const bool x_edge = rel[0] < 0.25 || rel[0] > 0.75;
  const bool y_edge = rel[1] < 0.25 || rel[1] > 0.75;
  if (!x_edge && !y_edge) return "in the middle of the room";
  if (std::abs(rel[0] - 0.5) >= std::abs(rel[1] - 0.5)) {
    return rel[0] < 0.5 ? "near the left side of the room" : "near the right side of the room";
  }
  return rel[1] < 0.5 ? "near the front of the room" : "near the back of the room";
}

std::string function_of(const std::string& category) {
  const auto* spec = scene::find_category(scene::default_palette(), category);
  return spec ? spec->function : std::string();
}

}  // namespace scenechat::dataset
