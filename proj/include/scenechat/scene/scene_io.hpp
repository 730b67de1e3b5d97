// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scenechat/scene/scene.hpp"

namespace scenechat::scene {

inline constexpr std::string_view kSceneFormatTag = "scenechat.scene/1";

/// JSON document with `scene_id` and `objects[]`; each object carries `id`,
/// `category`, `color`, `size`, `location`, `points` (flat xyz list) and
/// optionally `point_colors`. Colors written as 0-255 integers are scaled to
/// [0, 1] on read. Parsing failures raise ParseError carrying the line or
/// field; invariant failures raise ValidationError.
SceneRecord parse_scene(std::string_view text);
std::string serialize_scene(const SceneRecord& scene);

SceneRecord load_scene(const std::string& path);
void save_scene(const SceneRecord& scene, const std::string& path);

/// All `*.json` files of a directory in filename order.
std::vector<SceneRecord> load_scene_dir(const std::string& dir);
/// Writes `<dir>/<scene_id>.json` per scene, creating `dir` if needed.
void save_scene_dir(const std::vector<SceneRecord>& scenes, const std::string& dir);

}  // namespace scenechat::scene
