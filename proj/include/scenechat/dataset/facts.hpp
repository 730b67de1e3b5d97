// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "scenechat/scene/scene.hpp"

namespace scenechat::dataset {

/// The min(k, n_s) objects other than the target, nearest centroid first;
/// equal distances are ordered by object id. Throws NotFound for an
/// unknown target.
std::vector<const scene::ObjectRecord*> knn_neighbors(const scene::SceneRecord& scene, int target_id, int k = 10);

/// Where `a` sits relative to `b`, from the dominant axis of a - b:
/// "to the right of" / "to the left of" (x), "behind" / "in front of" (y),
/// "above" / "below" (z).
std::string direction_word(const scene::ObjectRecord& a, const scene::ObjectRecord& b);
const std::vector<std::string>& direction_words();

/// "small", "medium-sized" or "large" from the largest bbox extent.
std::string size_word(const scene::ObjectRecord& object);

/// Category plural: "chair" -> "chairs", "trash can" -> "trash cans".
std::string plural(const std::string& category);

/// "There is 1 chair" / "There are 3 chairs".
std::string count_phrase(int count, const std::string& category);

/// Named color closest to the object's mean color.
std::string color_word(const scene::ObjectRecord& object);

/// Coarse position in the room, e.g. "near the left wall".
std::string room_position(const scene::SceneRecord& scene, const scene::ObjectRecord& object);

/// Purpose phrase of a palette category, or "" when unknown.
std::string function_of(const std::string& category);

}  // namespace scenechat::dataset
