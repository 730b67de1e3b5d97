// SPDX-License-Identifier: Apache-2.0

#include "scenechat/encoder/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scenechat/core/error.hpp"

namespace scenechat::encoder {

void EncoderConfig::validate() const {
  if (d_point <= 0 || d_model <= 0) throw ValidationError("encoder widths must be positive");
  for (int w : point_mlp_layers) {
    if (w <= 0) throw ValidationError("point MLP widths must be positive");
  }
  if (relation_heads <= 0 || d_model % relation_heads != 0) {
    throw ValidationError("d_model " + std::to_string(d_model) + " is not divisible by relation_heads " +
                          std::to_string(relation_heads));
  }
  if (relation_ffn_mult <= 0) throw ValidationError("relation_ffn_mult must be positive");
  if (relation_layers <= 0) throw ValidationError("relation_layers must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"d_point", d_point},
          {"d_model", d_model},
          {"point_mlp_layers", point_mlp_layers},
          {"relation_heads", relation_heads},
          {"relation_ffn_mult", relation_ffn_mult},
          {"relation_layers", relation_layers}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.d_point = j.value("d_point", c.d_point);
  c.d_model = j.value("d_model", c.d_model);
  c.point_mlp_layers = j.value("point_mlp_layers", c.point_mlp_layers);
  c.relation_heads = j.value("relation_heads", c.relation_heads);
  c.relation_ffn_mult = j.value("relation_ffn_mult", c.relation_ffn_mult);
  c.relation_layers = j.value("relation_layers", c.relation_layers);
  c.validate();
  return c;
}

SceneStats SceneStats::of(const scene::SceneRecord& scene) {
  if (scene.objects.empty()) throw InvalidInput("SceneStats: empty scene");
  SceneStats s;
  scene::Vec3 lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& o : scene.objects) {
    const auto bmin = o.bbox_min();
    const auto bmax = o.bbox_max();
    for (int a = 0; a < 3; ++a) {
      s.centroid[a] += o.location[a];
      lo[a] = std::min(lo[a], bmin[a]);
      hi[a] = std::max(hi[a], bmax[a]);
    }
  }
  for (int a = 0; a < 3; ++a) {
    s.centroid[a] /= static_cast<double>(scene.objects.size());
    s.extent[a] = std::max(hi[a] - lo[a], kMinSceneExtent);
  }
  return s;
}

nn::Matrix normalized_attributes(const scene::ObjectRecord& object, const SceneStats& stats) {
  nn::Matrix x(1, 9);
  for (int a = 0; a < 3; ++a) {
    const double ext = std::max(stats.extent[a], kMinSceneExtent);
    x(0, a) = object.color[a];
    x(0, 3 + a) = object.size[a] / ext;
    x(0, 6 + a) = (object.location[a] - stats.centroid[a]) / (ext / 2.0);
  }
  return x;
}

PointMlpEncoder::PointMlpEncoder(nn::ParamStore& store, const std::string& name, const std::vector<int>& hidden,
                                 int out, Rng& rng)
    : out_(out) {
  int in = 6;
  int idx = 0;
  auto make = [&](int width) {
    layers_.push_back(
        nn::Linear::create(store, name + ".l" + std::to_string(idx++), in, width, 1.0 / std::sqrt(in), rng));
    in = width;
  };
  for (int w : hidden) make(w);
  make(out);
}

nn::Matrix PointMlpEncoder::canonical_input(const scene::PointCloud& cloud) {
  using Row = std::array<double, 6>;
  std::vector<Row> rows;
  rows.reserve(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const auto& p = cloud.points[i];
    const scene::Vec3 c = cloud.has_colors() ? cloud.colors[i] : scene::Vec3{0.5, 0.5, 0.5};
    rows.push_back({p[0], p[1], p[2], c[0], c[1], c[2]});
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  if (rows.empty()) throw InvalidInput("point encoder: empty cloud");

  scene::Vec3 centroid{};
  for (const auto& r : rows) {
    for (int a = 0; a < 3; ++a) centroid[a] += r[a];
  }
  for (auto& c : centroid) c /= static_cast<double>(rows.size());

  nn::Matrix x(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      x(i, a) = rows[i][a] - centroid[a];
      x(i, 3 + a) = rows[i][3 + a];
    }
  }
  return x;
}

nn::Var PointMlpEncoder::encode(const scene::PointCloud& cloud) const {
  nn::Var h = nn::Var::constant(canonical_input(cloud));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = nn::gelu(h);
  }
  return nn::max_pool_rows(h);
}

GeometryEncoder::GeometryEncoder(const EncoderConfig& config, nn::ParamStore& store, Rng& rng) : config_(config) {
  config_.validate();
  const int dp = config_.d_point;
  const int d = config_.d_model;
  g_ = std::make_unique<PointMlpEncoder>(store, "g", config_.point_mlp_layers, dp, rng);
  f_e_ = nn::Linear::create(store, "f_e", 9, dp, 1.0 / 3.0, rng);
  f_a_[0] = nn::Linear::create(store, "f_a.l0", dp, d, 1.0 / std::sqrt(dp), rng);
  f_a_[1] = nn::Linear::create(store, "f_a.l1", d, d, 1.0 / std::sqrt(d), rng);
  for (int i = 0; i < config_.relation_layers; ++i) {
    r_.push_back(nn::TransformerLayer::create(store, "r.l" + std::to_string(i), d, config_.relation_heads,
                                              config_.relation_ffn_mult, false, 1.0 / std::sqrt(d), rng));
  }
}

nn::Var GeometryEncoder::encode_points(const scene::PointCloud& cloud) const { return g_->encode(cloud); }

nn::Var GeometryEncoder::embed_attributes(const nn::Var& attrs) const {
  if (attrs.cols() != 9) throw InvalidInput("attribute vector must have 9 components");
  return f_e_(attrs);
}

nn::Var GeometryEncoder::align(const nn::Var& x) const { return f_a_[1](nn::gelu(f_a_[0](x))); }

nn::Var GeometryEncoder::encode_object(const scene::ObjectRecord& object, const SceneStats& stats) const {
  const nn::Var attrs = nn::Var::constant(normalized_attributes(object, stats));
  return align(nn::add(encode_points(object.cloud), embed_attributes(attrs)));
}

nn::Var GeometryEncoder::relate(const nn::Var& stacked) const {
  if (stacked.rows() < 2) throw InvalidInput("scene must contain at least one non-target object");
  if (stacked.cols() != config_.d_model) throw InvalidInput("relate: embedding width differs from d_model");
  nn::Var h = stacked;
  for (const auto& layer : r_) h = layer(h);
  return h;
}

nn::Var GeometryEncoder::encode_objects(const scene::SceneRecord& scene, int target_id) const {
  const auto& target = scene.at(target_id);
  const auto others = scene.others(target_id);
  if (others.empty()) throw InvalidInput("scene must contain at least one non-target object");
  const SceneStats stats = SceneStats::of(scene);
  std::vector<nn::Var> rows;
  rows.reserve(others.size() + 1);
  rows.push_back(encode_object(target, stats));
  for (const auto* o : others) rows.push_back(encode_object(*o, stats));
  return nn::concat_rows(rows);
}

nn::Var GeometryEncoder::encode_scene_var(const scene::SceneRecord& scene, int target_id) const {
  return relate(encode_objects(scene, target_id));
}

SceneEmbeddings GeometryEncoder::encode_scene(const scene::SceneRecord& scene, int target_id) const {
  return SceneEmbeddings::from_stacked(encode_scene_var(scene, target_id).value());
}

void GeometryEncoder::init_relation_zero() {
  for (auto& layer : r_) layer.zero_output_projections();
}

}  // namespace scenechat::encoder
