// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "reference.hpp"
#include "scenechat/core/error.hpp"
#include "scenechat/encoder/encoder.hpp"
#include "scenechat/nn/gradcheck.hpp"
#include "scenechat/scene/synthetic.hpp"

using namespace scenechat;
using namespace scenechat::encoder;
using testutil::random_matrix;

namespace {

struct Fixture {
  nn::ParamStore store;
  std::unique_ptr<GeometryEncoder> enc;
  explicit Fixture(EncoderConfig cfg, std::uint64_t seed = 1) {
    Rng rng(seed);
    enc = std::make_unique<GeometryEncoder>(cfg, store, rng);
  }
};

EncoderConfig small_config() {
  EncoderConfig c;
  c.d_point = 8;
  c.d_model = 8;
  c.point_mlp_layers = {6};
  c.relation_heads = 2;
  c.relation_ffn_mult = 2;
  return c;
}

scene::PointCloud shuffled(const scene::PointCloud& c, Rng& rng) {
  std::vector<std::size_t> order(c.points.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  scene::PointCloud out;
  for (std::size_t i : order) {
    out.points.push_back(c.points[i]);
    if (c.has_colors()) out.colors.push_back(c.colors[i]);
  }
  return out;
}

scene::SceneRecord test_scene(std::uint64_t seed, int n) {
  scene::SyntheticSceneSpec spec;
  spec.seed = seed;
  spec.num_objects = n;
  spec.points_per_object = 16;
  return scene::generate_synthetic_scene(spec);
}

}  // namespace

TEST_CASE("point encoder is bitwise permutation invariant") {
  Fixture f(EncoderConfig{});
  Rng rng(2);
  const auto s = test_scene(3, 4);
  for (const auto& o : s.objects) {
    const nn::Matrix base = f.enc->encode_points(o.cloud).value();
    for (int t = 0; t < 5; ++t) {
      CHECK((f.enc->encode_points(shuffled(o.cloud, rng)).value().array() == base.array()).all());
    }
  }
}

TEST_CASE("duplicated points encode like a single point") {
  Fixture f(EncoderConfig{});
  scene::PointCloud one{{{0.3, -0.2, 1.0}}, {{0.1, 0.2, 0.3}}};
  scene::PointCloud many;
  for (int i = 0; i < 12; ++i) {
    many.points.push_back(one.points[0]);
    many.colors.push_back(one.colors[0]);
  }
  CHECK((f.enc->encode_points(many).value().array() == f.enc->encode_points(one).value().array()).all());
}

TEST_CASE("two-point cloud with hand-set weights") {
  EncoderConfig cfg;
  cfg.d_point = 2;
  cfg.d_model = 2;
  cfg.point_mlp_layers = {2};
  cfg.relation_heads = 1;
  Fixture f(cfg);
  const auto& layers = f.enc->point_encoder().layers();
  nn::Var w0 = layers[0].weight, b0 = layers[0].bias, w1 = layers[1].weight, b1 = layers[1].bias;
  w0.mutable_value().setZero();
  w0.mutable_value()(0, 0) = 1.0;   // x -> h0
  w0.mutable_value()(3, 1) = 2.0;   // r -> h1
  b0.mutable_value() << 0.5, -0.25;
  w1.mutable_value() << 1.0, -1.0, 0.5, 2.0;
  b1.mutable_value() << 0.1, 0.0;

  // Points (0,0,0) red and (2,0,0) blue: centered x = -1 and 1.
  scene::PointCloud c{{{0, 0, 0}, {2, 0, 0}}, {{1, 0, 0}, {0, 0, 1}}};
  auto forward = [](double x, double r) {
    const double h0 = ref::gelu(x + 0.5), h1 = ref::gelu(2.0 * r - 0.25);
    return std::array<double, 2>{h0 * 1.0 + h1 * 0.5 + 0.1, h0 * -1.0 + h1 * 2.0};
  };
  const auto p = forward(-1.0, 1.0), q = forward(1.0, 0.0);
  const nn::Matrix out = f.enc->encode_points(c).value();
  CHECK(std::abs(out(0, 0) - std::max(p[0], q[0])) < 1e-12);
  CHECK(std::abs(out(0, 1) - std::max(p[1], q[1])) < 1e-12);
}

TEST_CASE("attribute projector is affine") {
  Fixture f(EncoderConfig{});
  Rng rng(4);
  auto fe = [&](const nn::Matrix& x) { return f.enc->embed_attributes(nn::Var::constant(x)).value(); };
  const nn::Matrix zero = nn::Matrix::Zero(1, 9);
  CHECK((fe(zero).array() == f.enc->f_e().bias.value().array()).all());
  const nn::Matrix a = random_matrix(1, 9, rng), b = random_matrix(1, 9, rng);
  CHECK(testutil::max_abs_diff(fe(a) + fe(b) - fe(zero), fe(a + b)) < 1e-6);
  const auto& w = f.enc->f_e().weight.value();
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double acc = f.enc->f_e().bias.value()(0, j);
    for (int k = 0; k < 9; ++k) acc += a(0, k) * w(k, j);
    CHECK(std::abs(fe(a)(0, j) - acc) < 1e-9);
  }
  CHECK_THROWS_AS(f.enc->embed_attributes(nn::Var::constant(nn::Matrix::Zero(1, 8))), InvalidInput);
}

TEST_CASE("object embedding with a silenced attribute path is f_a of g") {
  Fixture f(small_config());
  const auto s = test_scene(5, 3);
  nn::Var w = f.enc->f_e().weight, b = f.enc->f_e().bias;
  w.mutable_value().setZero();
  b.mutable_value().setZero();
  const SceneStats stats = SceneStats::of(s);
  const nn::Matrix z = f.enc->encode_object(s.objects[0], stats).value();
  const ref::Mat g = ref::to_mat(f.enc->encode_points(s.objects[0].cloud).value());
  ref::Mat h = ref::affine(g, f.enc->f_a()[0]);
  for (double& e : h[0]) e = ref::gelu(e);
  CHECK(ref::max_diff(ref::affine(h, f.enc->f_a()[1]), z) < 1e-12);
}

TEST_CASE("object embedding matches a straight-line recomputation") {
  Fixture f(small_config(), 17);
  scene::PointCloud cloud;
  Rng rng(6);
  for (int i = 0; i < 8; ++i) {
    cloud.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
    cloud.colors.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  scene::SceneRecord s;
  s.scene_id = "g";
  s.objects.push_back(scene::make_object(0, "chair", cloud));
  scene::PointCloud other = cloud;
  for (auto& p : other.points) p[0] += 2.0;
  s.objects.push_back(scene::make_object(1, "table", other));

  // Scene statistics.
  double cen[3], lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    cen[a] = (s.objects[0].location[a] + s.objects[1].location[a]) / 2;
    lo[a] = std::min(s.objects[0].bbox_min()[a], s.objects[1].bbox_min()[a]);
    hi[a] = std::max(s.objects[0].bbox_max()[a], s.objects[1].bbox_max()[a]);
  }
  const auto& o = s.objects[0];
  ref::Mat attrs(1, std::vector<double>(9));
  for (int a = 0; a < 3; ++a) {
    const double ext = std::max(hi[a] - lo[a], 1e-2);
    attrs[0][a] = o.color[a];
    attrs[0][3 + a] = o.size[a] / ext;
    attrs[0][6 + a] = (o.location[a] - cen[a]) / (ext / 2);
  }
  // Point MLP on centered points (all 8 points distinct).
  double pc[3] = {0, 0, 0};
  for (const auto& p : cloud.points)
    for (int a = 0; a < 3; ++a) pc[a] += p[a] / 8.0;
  ref::Mat pts;
  for (int i = 0; i < 8; ++i) {
    pts.push_back({cloud.points[i][0] - pc[0], cloud.points[i][1] - pc[1], cloud.points[i][2] - pc[2],
                   cloud.colors[i][0], cloud.colors[i][1], cloud.colors[i][2]});
  }
  const auto& layers = f.enc->point_encoder().layers();
  ref::Mat h = ref::affine(pts, layers[0]);
  for (auto& row : h)
    for (double& e : row) e = ref::gelu(e);
  h = ref::affine(h, layers[1]);
  std::vector<double> g(h[0].size(), -1e300);
  for (const auto& row : h)
    for (std::size_t j = 0; j < row.size(); ++j) g[j] = std::max(g[j], row[j]);
  ref::Mat fused = ref::affine(attrs, f.enc->f_e());
  for (std::size_t j = 0; j < g.size(); ++j) fused[0][j] += g[j];
  ref::Mat z = ref::affine(fused, f.enc->f_a()[0]);
  for (double& e : z[0]) e = ref::gelu(e);
  z = ref::affine(z, f.enc->f_a()[1]);

  CHECK(ref::max_diff(z, f.enc->encode_object(o, SceneStats::of(s)).value()) < 1e-9);
}

TEST_CASE("objects equal up to point order embed identically") {
  Fixture f(EncoderConfig{});
  const auto s = test_scene(8, 3);
  Rng rng(9);
  const SceneStats stats = SceneStats::of(s);
  scene::ObjectRecord copy = s.objects[1];
  copy.cloud = shuffled(copy.cloud, rng);
  CHECK((f.enc->encode_object(copy, stats).value().array() ==
         f.enc->encode_object(s.objects[1], stats).value().array())
            .all());
}

TEST_CASE("relation module") {
  Fixture f(small_config());
  Rng rng(10);

  SUBCASE("needs at least one other object") {
    CHECK_THROWS_WITH_AS(f.enc->relate(nn::Var::constant(random_matrix(1, 8, rng))),
                         "scene must contain at least one non-target object", InvalidInput);
  }
  SUBCASE("zero initialization gives the exact identity") {
    f.enc->init_relation_zero();
    for (int t = 0; t < 10; ++t) {
      const nn::Matrix x = random_matrix(1 + 1 + t % 5, 8, rng, 2.0);
      CHECK((f.enc->relate(nn::Var::constant(x)).value().array() == x.array()).all());
    }
  }
  SUBCASE("permuting the others leaves the target output unchanged") {
    const nn::Matrix x = random_matrix(5, 8, rng);
    nn::Matrix perm = x;
    perm.row(1) = x.row(3);
    perm.row(3) = x.row(4);
    perm.row(4) = x.row(1);
    const nn::Matrix a = f.enc->relate(nn::Var::constant(x)).value();
    const nn::Matrix b = f.enc->relate(nn::Var::constant(perm)).value();
    CHECK((a.row(0) - b.row(0)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((a.row(1) - b.row(4)).cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("matches a naive attention + FFN computation") {
    EncoderConfig cfg = small_config();
    cfg.d_model = 4;
    cfg.d_point = 4;
    Fixture tiny(cfg, 23);
    const nn::Matrix x = random_matrix(3, 4, rng);
    const ref::Mat want = ref::block(tiny.enc->relation_layers()[0], ref::to_mat(x));
    CHECK(ref::max_diff(want, tiny.enc->relate(nn::Var::constant(x)).value()) < 1e-6);
  }
  SUBCASE("zeroed parameters still learn") {
    f.enc->init_relation_zero();
    f.store.set_trainable({"r"});
    const nn::Matrix x = random_matrix(3, 8, rng);
    const nn::Matrix target = random_matrix(3, 8, rng);
    auto loss = [&] {
      nn::Var d = nn::sub(f.enc->relate(nn::Var::constant(x)), nn::Var::constant(target));
      return nn::sum(nn::matmul_nt(d, d));
    };
    std::vector<std::pair<std::string, nn::Var>> zeroed;
    for (const auto& e : f.store.entries()) {
      if (e.name.find(".attn.o.") != std::string::npos || e.name.find(".ffn.fc2.") != std::string::npos) {
        zeroed.emplace_back(e.name, e.var);
      }
    }
    REQUIRE(zeroed.size() == 4);
    const nn::GradcheckReport report = nn::gradcheck(loss, zeroed);
    CHECK(report.passed);
    f.store.zero_grad();
    nn::backward(loss());
    CHECK(zeroed[0].second.grad().cwiseAbs().maxCoeff() > 0.0);
    for (auto& [name, v] : zeroed) v.mutable_value() -= 1e-2 * v.grad();
    CHECK_FALSE((f.enc->relate(nn::Var::constant(x)).value().array() == x.array()).all());
  }
}

TEST_CASE("whole encoder stack passes a gradient check at d = 8") {
  Fixture f(small_config(), 31);
  f.store.set_trainable({"g", "f_e", "f_a", "r"});
  const auto s = test_scene(12, 3);
  const int target = s.objects[1].id;
  Rng rng(13);
  const nn::Matrix w = random_matrix(3, 8, rng);
  auto loss = [&] {
    nn::Var out = f.enc->encode_scene_var(s, target);
    nn::Var prod = nn::matmul_nt(out, nn::Var::constant(w));
    return nn::sum(nn::gelu(prod));
  };
  std::vector<std::pair<std::string, nn::Var>> params;
  for (const auto& e : f.store.entries()) params.emplace_back(e.name, e.var);
  const nn::GradcheckReport r = nn::gradcheck(loss, params);
  for (const auto& g : r.groups) {
    INFO(g.name << " " << g.max_rel_error);
    CHECK(g.passed);
  }
}

TEST_CASE("forward passes stay finite for random weights and inputs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture f(EncoderConfig{}, seed);
    const auto s = test_scene(100 + seed, 2 + static_cast<int>(seed % 5));
    const SceneEmbeddings e = f.enc->encode_scene(s, s.objects[0].id);
    CHECK(e.target.allFinite());
    CHECK(e.others.allFinite());
    CHECK(e.other_count() == static_cast<int>(s.objects.size()) - 1);
  }
}

TEST_CASE("attribute normalization centers on the scene") {
  const auto s = test_scene(14, 4);
  const SceneStats st = SceneStats::of(s);
  double mean[3] = {0, 0, 0};
  for (const auto& o : s.objects) {
    const nn::Matrix a = normalized_attributes(o, st);
    for (int k = 0; k < 3; ++k) {
      mean[k] += a(0, 6 + k);
      CHECK(std::abs(a(0, 6 + k)) <= 2.0);
      CHECK(a(0, 3 + k) <= 1.0 + 1e-12);
    }
  }
  for (double m : mean) CHECK(std::abs(m) < 1e-9);
}
