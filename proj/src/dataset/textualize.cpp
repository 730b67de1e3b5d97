// SPDX-License-Identifier: Apache-2.0

#include "scenechat/dataset/textualize.hpp"

#include <regex>

#include <json.hpp>

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/facts.hpp"

namespace scenechat::dataset {

std::string render_entry(const std::string& category, const scene::Vec3& location) {
  return category + ":[" + format_fixed2(location[0]) + ", " + format_fixed2(location[1]) + ", " +
         format_fixed2(location[2]) + "]";
}

TextualizedScene textualize(const scene::SceneRecord& scene, int target_id, const std::vector<std::string>& captions,
                            int k) {
  const auto& target = scene.at(target_id);
  TextualizedScene tx;
  tx.captions = captions;
  tx.target_line = "Described object: {" + render_entry(target.category, target.location) + "}";
  std::string list;
  const auto neighbors = knn_neighbors(scene, target_id, k);
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    if (i) list += ", ";
    list += render_entry(neighbors[i]->category, neighbors[i]->location);
  }
  tx.neighbors_line = "Neighbor objects: {" + list + "}";
  tx.neighbor_count = static_cast<int>(neighbors.size());
  return tx;
}

std::string TextualizedScene::render() const {
  std::string out;
  if (!captions.empty()) {
    out += "Caption of the target object:\n\nDescriptions: [";
    for (std::size_t i = 0; i < captions.size(); ++i) {
      if (i) out += ", ";
      out += nlohmann::json(captions[i]).dump();
    }
    out += "]\n\n";
  }
  out += "Categories and locations of target object and its " + std::to_string(neighbor_count) +
         (neighbor_count == 1 ? " neighbor:\n\n" : " neighbors:\n\n");
  out += target_line + "; " + neighbors_line;
  return out;
}

std::vector<ParsedEntry> parse_entries(std::string_view line) {
  const auto open = line.find('{');
  const auto close = line.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw ParseError("textualized line", "missing braces");
  }
  const std::string body(line.substr(open + 1, close - open - 1));
  static const std::regex kEntry(R"(\s*([^:,\[\]{}]+):\[\s*(-?\d+\.\d\d),\s*(-?\d+\.\d\d),\s*(-?\d+\.\d\d)\]\s*(,|$))");
  std::vector<ParsedEntry> out;
  auto it = body.cbegin();
  std::smatch m;
  while (it != body.cend()) {
    if (!std::regex_search(it, body.cend(), m, kEntry, std::regex_constants::match_continuous)) {
      throw ParseError("textualized line", "malformed entry near '" + std::string(it, body.cend()) + "'");
    }
    ParsedEntry e;
    e.category = trim(m[1].str());
    for (int k = 0; k < 3; ++k) e.location[k] = std::stod(m[2 + k].str());
    out.push_back(std::move(e));
    it = m[0].second;
  }
  return out;
}

}  // namespace scenechat::dataset
