// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "scenechat/scene/scene.hpp"

namespace scenechat::dataset {

/// A target object and its neighborhood rendered as text for a text-only
/// model.
struct TextualizedScene {
  std::vector<std::string> captions;
  std::string target_line;     // "Described object: {cat:[x, y, z]}"
  std::string neighbors_line;  // "Neighbor objects: {cat:[x, y, z], ...}"
  int neighbor_count = 0;

  /// Captions block (omitted when there are no captions), then the
  /// categories-and-locations block.
  std::string render() const;
};

/// "cat:[x, y, z]" with two decimals per coordinate.
std::string render_entry(const std::string& category, const scene::Vec3& location);

TextualizedScene textualize(const scene::SceneRecord& scene, int target_id, const std::vector<std::string>& captions,
                            int k = 10);

struct ParsedEntry {
  std::string category;
  scene::Vec3 location{};
};

/// Parses a target or neighbors line back into entries. Throws ParseError.
std::vector<ParsedEntry> parse_entries(std::string_view line);

}  // namespace scenechat::dataset
