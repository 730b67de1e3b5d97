// SPDX-License-Identifier: Apache-2.0

#include "scenechat/scene/scene_io.hpp"

#include <algorithm>
#include <filesystem>
#include <json.hpp>

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"

namespace scenechat::scene {
namespace {

using nlohmann::json;

std::string line_of(std::string_view text, std::size_t byte) {
  const std::size_t end = std::min(byte, text.size());
  const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n');
  return "line " + std::to_string(line);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key, "missing field");
  return *it;
}

bool is_byte_scale(const json& arr) {
  bool any_big = false;
  for (const auto& v : arr) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) return false;
    if (v.get<long long>() > 1) any_big = true;
  }
  return any_big;
}

std::vector<double> numbers(const json& arr, const std::string& where, bool color) {
  if (!arr.is_array()) throw ParseError(where, "expected an array of numbers");
  const bool bytes = color && is_byte_scale(arr);
  std::vector<double> out;
  out.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw ParseError(where + "[" + std::to_string(i) + "]", "expected a number");
    double v = arr[i].get<double>();
    if (bytes) v /= 255.0;
    out.push_back(v);
  }
  return out;
}

Vec3 vec3(const json& arr, const std::string& where, bool color = false) {
  const auto v = numbers(arr, where, color);
  if (v.size() != 3) throw ParseError(where, "expected 3 values, got " + std::to_string(v.size()));
  return {v[0], v[1], v[2]};
}

std::vector<Vec3> triples(const json& arr, const std::string& where, bool color = false) {
  const auto v = numbers(arr, where, color);
  if (v.size() % 3 != 0) throw ParseError(where, "flat list length is not a multiple of 3");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < v.size(); i += 3) out.push_back({v[i], v[i + 1], v[i + 2]});
  return out;
}

std::string num(double v) { return json(v).dump(); }

std::string vec_text(const Vec3& v) { return "[" + num(v[0]) + ", " + num(v[1]) + ", " + num(v[2]) + "]"; }

std::string flat_text(const std::vector<Vec3>& vs) {
  std::string out = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ", ";
    out += num(vs[i][0]) + ", " + num(vs[i][1]) + ", " + num(vs[i][2]);
  }
  return out + "]";
}

}  // namespace

SceneRecord parse_scene(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_of(text, e.byte), e.what());
  }
  if (!doc.is_object()) throw ParseError("", "scene document must be an object");
  if (auto fmt = doc.find("format"); fmt != doc.end() && *fmt != std::string(kSceneFormatTag)) {
    throw ParseError("format", "unsupported scene format " + fmt->dump());
  }
  if (auto units = doc.find("units"); units != doc.end() && *units != "meters") {
    throw ParseError("units", "only meters are supported");
  }
  SceneRecord scene;
  const json& sid = field(doc, "scene_id", "scene");
  if (!sid.is_string()) throw ParseError("scene_id", "expected a string");
  scene.scene_id = sid.get<std::string>();
  const json& objs = field(doc, "objects", "scene");
  if (!objs.is_array()) throw ParseError("objects", "expected an array");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string where = "objects[" + std::to_string(i) + "]";
    const json& o = objs[i];
    if (!o.is_object()) throw ParseError(where, "expected an object");
    ObjectRecord rec;
    const json& id = field(o, "id", where);
    if (!id.is_number_integer()) throw ParseError(where + ".id", "expected an integer");
    rec.id = id.get<int>();
    const json& cat = field(o, "category", where);
    if (!cat.is_string()) throw ParseError(where + ".category", "expected a string");
    rec.category = cat.get<std::string>();
    rec.color = vec3(field(o, "color", where), where + ".color", true);
    rec.size = vec3(field(o, "size", where), where + ".size");
    rec.location = vec3(field(o, "location", where), where + ".location");
    rec.cloud.points = triples(field(o, "points", where), where + ".points");
    if (auto pc = o.find("point_colors"); pc != o.end()) {
      rec.cloud.colors = triples(*pc, where + ".point_colors", true);
    }
    scene.objects.push_back(std::move(rec));
  }
  validate_scene(scene);
  return scene;
}

std::string serialize_scene(const SceneRecord& scene) {
  std::string out = "{\n";
  out += "  \"format\": " + json(std::string(kSceneFormatTag)).dump() + ",\n";
  out += "  \"scene_id\": " + json(scene.scene_id).dump() + ",\n";
  out += "  \"units\": \"meters\",\n";
  out += "  \"objects\": [";
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const ObjectRecord& o = scene.objects[i];
    out += i ? ",\n    {\n" : "\n    {\n";
    out += "      \"id\": " + std::to_string(o.id) + ",\n";
    out += "      \"category\": " + json(o.category).dump() + ",\n";
    out += "      \"color\": " + vec_text(o.color) + ",\n";
    out += "      \"size\": " + vec_text(o.size) + ",\n";
    out += "      \"location\": " + vec_text(o.location) + ",\n";
    out += "      \"points\": " + flat_text(o.cloud.points);
    if (o.cloud.has_colors()) out += ",\n      \"point_colors\": " + flat_text(o.cloud.colors);
    out += "\n    }";
  }
  out += scene.objects.empty() ? "]\n}\n" : "\n  ]\n}\n";
  return out;
}

SceneRecord load_scene(const std::string& path) { return parse_scene(read_file(path)); }

void save_scene(const SceneRecord& scene, const std::string& path) { write_file(path, serialize_scene(scene)); }

std::vector<SceneRecord> load_scene_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw NotFound("scene directory " + dir + " does not exist");
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  std::vector<SceneRecord> scenes;
  for (const auto& f : files) {
    try {
      scenes.push_back(load_scene(f));
    } catch (const ParseError& e) {
      throw ParseError(f, e.what());
    }
  }
  return scenes;
}

void save_scene_dir(const std::vector<SceneRecord>& scenes, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& s : scenes) save_scene(s, (std::filesystem::path(dir) / (s.scene_id + ".json")).string());
}

}  // namespace scenechat::scene
