// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <vector>

#include <json.hpp>

#include "scenechat/core/rng.hpp"
#include "scenechat/encoder/embeddings.hpp"
#include "scenechat/nn/layers.hpp"
#include "scenechat/nn/param_store.hpp"
#include "scenechat/scene/scene.hpp"

namespace scenechat::encoder {

struct EncoderConfig {
  int d_point = 128;
  int d_model = 128;
  /// Hidden widths of the per-point MLP; its output layer has width d_point.
  std::vector<int> point_mlp_layers{64};
  int relation_heads = 4;
  int relation_ffn_mult = 4;
  int relation_layers = 1;

  /// Throws ValidationError.
  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

/// Scene-level normalization constants for object attributes.
struct SceneStats {
  scene::Vec3 centroid{};  // mean of object locations
  scene::Vec3 extent{};    // per-axis extent of the union of object boxes

  static SceneStats of(const scene::SceneRecord& scene);
};

inline constexpr double kMinSceneExtent = 1e-2;

/// [c; s / extent; (l - centroid) / (extent / 2)] as a 1 x 9 row.
nn::Matrix normalized_attributes(const scene::ObjectRecord& object, const SceneStats& stats);

/// Anything that maps a point cloud to a fixed-width vector.
class PointBackend {
 public:
  virtual ~PointBackend() = default;
  virtual int output_width() const = 0;
  /// 1 x output_width.
  virtual nn::Var encode(const scene::PointCloud& cloud) const = 0;
};

/// Shared per-point MLP on (xyz - centroid, rgb) followed by a column-wise
/// max. Points are put in a canonical order and exact duplicates dropped
/// first, so the result is bitwise independent of the input ordering and
/// of repeated points.
class PointMlpEncoder final : public PointBackend {
 public:
  PointMlpEncoder(nn::ParamStore& store, const std::string& name, const std::vector<int>& hidden, int out, Rng& rng);
  int output_width() const override { return out_; }
  nn::Var encode(const scene::PointCloud& cloud) const override;
  const std::vector<nn::Linear>& layers() const { return layers_; }

  /// N x 6 input rows after canonicalization.
  static nn::Matrix canonical_input(const scene::PointCloud& cloud);

 private:
  std::vector<nn::Linear> layers_;
  int out_ = 0;
};

/// Object encoder z = f_a(g(o) + f_e(attributes)) and relation module r.
///
/// Parameters live in the caller's ParamStore under the groups "g", "f_e",
/// "f_a" and "r".
class GeometryEncoder {
 public:
  GeometryEncoder(const EncoderConfig& config, nn::ParamStore& store, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  nn::Var encode_points(const scene::PointCloud& cloud) const;
  /// `attrs` is 1 x 9 (or n x 9).
  nn::Var embed_attributes(const nn::Var& attrs) const;
  nn::Var align(const nn::Var& x) const;
  /// 1 x d_model.
  nn::Var encode_object(const scene::ObjectRecord& object, const SceneStats& stats) const;
  /// Rows: target first, then others. Throws when there are no others.
  nn::Var relate(const nn::Var& stacked) const;

  /// Pre-relation embeddings, target first, others in scene order.
  nn::Var encode_objects(const scene::SceneRecord& scene, int target_id) const;
  /// relate(encode_objects(...)).
  nn::Var encode_scene_var(const scene::SceneRecord& scene, int target_id) const;
  SceneEmbeddings encode_scene(const scene::SceneRecord& scene, int target_id) const;

  /// Zeroes r's output projections so r is the identity.
  void init_relation_zero();

  const PointMlpEncoder& point_encoder() const { return *g_; }
  const nn::Linear& f_e() const { return f_e_; }
  const std::array<nn::Linear, 2>& f_a() const { return f_a_; }
  const std::vector<nn::TransformerLayer>& relation_layers() const { return r_; }

 private:
  EncoderConfig config_;
  std::unique_ptr<PointMlpEncoder> g_;
  nn::Linear f_e_;
  std::array<nn::Linear, 2> f_a_;
  std::vector<nn::TransformerLayer> r_;
};

}  // namespace scenechat::encoder
