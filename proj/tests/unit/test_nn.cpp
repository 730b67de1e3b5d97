// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "scenechat/core/error.hpp"
#include "scenechat/nn/gradcheck.hpp"
#include "scenechat/nn/layers.hpp"
#include "scenechat/nn/ops.hpp"
#include "scenechat/nn/optim.hpp"
#include "scenechat/nn/param_store.hpp"

using namespace scenechat;
using namespace scenechat::nn;
using testutil::random_matrix;

namespace {



// Contracts an arbitrary output with fixed random weights so every element matters.
Var probe(const Var& y, std::uint64_t seed) {
  Rng rng(seed);
  const Matrix w = random_matrix(y.rows(), y.cols(), rng);
  Var prod = make_node(y.value().cwiseProduct(w), {y}, [w](Node& self) {
    self.parents[0]->grad_buffer() += self.grad.cwiseProduct(w);
  });
  return sum(prod);
}

void expect_gradcheck(const std::function<Var()>& fn, const std::vector<std::pair<std::string, Var>>& params) {
  const GradcheckReport r = gradcheck(fn, params);
  for (const auto& g : r.groups) {
    INFO(g.name << " max rel error " << g.max_rel_error);
    CHECK(g.passed);
  }
  CHECK(r.max_rel_error < 1e-4);
}

}  // namespace

TEST_CASE("matmul and linear agree with naive loops") {
  Rng rng(1);
  const Matrix a = random_matrix(3, 4, rng);
  const Matrix b = random_matrix(4, 5, rng);
  const Matrix bias = random_matrix(1, 5, rng);
  const Matrix out = linear(Var::constant(a), Var::constant(b), Var::constant(bias)).value();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) {
      double acc = bias(0, j);
      for (int k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
      CHECK(std::abs(out(i, j) - acc) < 1e-12);
    }
  }
}

TEST_CASE("elementwise and reduction ops pass gradient checks") {
  Rng rng(2);
  Var x = Var::parameter(random_matrix(3, 6, rng));
  Var w = Var::parameter(random_matrix(6, 4, rng));
  Var b = Var::parameter(random_matrix(1, 4, rng));
  Var y = Var::parameter(random_matrix(4, 6, rng));
  Var g = Var::parameter(random_matrix(1, 6, rng));
  Var be = Var::parameter(random_matrix(1, 6, rng));

  SUBCASE("linear + gelu") { expect_gradcheck([&] { return probe(gelu(linear(x, w, b)), 9); }, {{"x", x}, {"w", w}, {"b", b}}); }
  SUBCASE("relu away from zero") { expect_gradcheck([&] { return probe(relu(add(x, x)), 3); }, {{"x", x}}); }
  SUBCASE("matmul_nt") { expect_gradcheck([&] { return probe(matmul_nt(x, y), 4); }, {{"x", x}, {"y", y}}); }
  SUBCASE("layer_norm") {
    expect_gradcheck([&] { return probe(layer_norm(x, g, be), 5); }, {{"x", x}, {"gamma", g}, {"beta", be}});
  }
  SUBCASE("sub and scale") { expect_gradcheck([&] { return probe(scale(sub(x, add(x, x)), 0.3), 6); }, {{"x", x}}); }
  SUBCASE("pooling and normalization") {
    expect_gradcheck([&] { return probe(concat_rows({max_pool_rows(x), mean_rows(x), l2_normalize_rows(x)}), 7); },
                     {{"x", x}});
  }
  SUBCASE("row slicing and gathering") {
    const std::vector<int> ids{2, 0, 2};
    expect_gradcheck([&] { return probe(concat_rows({slice_rows(x, 1, 2), gather_rows(x, ids)}), 8); }, {{"x", x}});
  }
  SUBCASE("mix_rows routes to table and slots") {
    const std::vector<int> ids{1, -1, 0, -2, 1};
    Var slots = Var::parameter(random_matrix(2, 6, rng));
    expect_gradcheck([&] { return probe(mix_rows(x, ids, slots), 10); }, {{"table", x}, {"slots", slots}});
  }
  SUBCASE("cross entropy") {
    const std::vector<int> targets{1, -1, 3};
    expect_gradcheck([&] { return cross_entropy(matmul(x, w), targets); }, {{"x", x}, {"w", w}});
  }
  SUBCASE("cosine loss") {
    Var z = Var::parameter(random_matrix(3, 4, rng));
    Var t = Var::constant(random_matrix(3, 4, rng));
    const GradcheckReport r = gradcheck([&] { return cosine_loss(z, t); }, {{"z", z}});
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("attention passes gradient checks with causal and key masks") {
  Rng rng(3);
  Var q = Var::parameter(random_matrix(4, 8, rng));
  Var k = Var::parameter(random_matrix(4, 8, rng));
  Var v = Var::parameter(random_matrix(4, 8, rng));
  const std::vector<std::uint8_t> mask{1, 1, 0, 1};
  AttentionOptions opts;
  opts.heads = 2;
  opts.causal = true;
  opts.key_mask = mask;
  expect_gradcheck([&] { return probe(attention(q, k, v, opts), 11); }, {{"q", q}, {"k", k}, {"v", v}});
}

TEST_CASE("attention weights are row-stochastic") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix q = random_matrix(5, 8, rng, 3.0);
    const Matrix k = random_matrix(7, 8, rng, 3.0);
    AttentionOptions opts;
    opts.heads = 4;
    opts.causal = trial % 2 == 0;
    for (const Matrix& p : attention_probabilities(q, k, opts)) {
      for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("attention matches a straight-line single-head computation") {
  Rng rng(5);
  const Matrix q = random_matrix(3, 4, rng), k = random_matrix(3, 4, rng), v = random_matrix(3, 4, rng);
  AttentionOptions opts;
  opts.causal = true;
  const Matrix out = attention(Var::constant(q), Var::constant(k), Var::constant(v), opts).value();
  for (int i = 0; i < 3; ++i) {
    std::vector<double> s;
    double mx = -1e300;
    for (int j = 0; j <= i; ++j) {
      double d = 0;
      for (int c = 0; c < 4; ++c) d += q(i, c) * k(j, c);
      s.push_back(d / 2.0);
      mx = std::max(mx, s.back());
    }
    double z = 0;
    for (double& e : s) z += (e = std::exp(e - mx));
    for (int c = 0; c < 4; ++c) {
      double acc = 0;
      for (int j = 0; j <= i; ++j) acc += s[j] / z * v(j, c);
      CHECK(std::abs(out(i, c) - acc) < 1e-12);
    }
  }
}

TEST_CASE("cross entropy of uniform logits is log of the vocabulary size") {
  const Matrix logits = Matrix::Zero(3, 16);
  const std::vector<int> targets{1, 5, 15};
  CHECK(cross_entropy(Var::constant(logits), targets).item() == doctest::Approx(std::log(16.0)).epsilon(1e-12));
  const std::vector<int> none{-1, -1, -1};
  CHECK_THROWS_AS(cross_entropy(Var::constant(logits), none), Error);
}

TEST_CASE("cosine loss special cases") {
  const Matrix y = (Matrix(1, 3) << 0.6, 0.8, 0.0).finished();
  CHECK(cosine_loss(Var::constant(y), Var::constant(y)).item() == doctest::Approx(0.0));
  CHECK(cosine_loss(Var::constant((Matrix(1, 3) << 0.0, 0.0, 2.0).finished()), Var::constant(y)).item() ==
        doctest::Approx(1.0));
  CHECK(cosine_loss(Var::constant(-y), Var::constant(y)).item() == doctest::Approx(2.0));
  CHECK_THROWS_WITH_AS(cosine_loss(Var::constant(Matrix::Zero(1, 3)), Var::constant(y)), doctest::Contains("degenerate"),
                       Error);
}

TEST_CASE("gradcheck reports a corrupted gradient") {
  Rng rng(6);
  Var x = Var::parameter(random_matrix(2, 3, rng));
  auto broken = [&] {
    return make_node(Matrix::Constant(1, 1, x.value().squaredNorm()), {x},
                     [](Node& self) { self.parents[0]->grad_buffer() += 3.0 * self.parents[0]->value; });
  };
  const GradcheckReport r = gradcheck(broken, {{"x", x}});
  CHECK_FALSE(r.passed);
  CHECK(r.max_rel_error > 0.1);
}

TEST_CASE("frozen inputs do not record a graph") {
  Rng rng(7);
  Var w = Var::constant(random_matrix(3, 3, rng));
  Var out = gelu(matmul(w, w));
  CHECK(out.node()->parents.empty());
  CHECK_FALSE(out.requires_grad());
}

TEST_CASE("adam moves parameters and clips the global norm") {
  Var p = Var::parameter(Matrix::Constant(1, 2, 1.0));
  Adam opt({p});
  p.mutable_grad() = Matrix::Constant(1, 2, 100.0);
  const double norm = opt.step(0.1);
  CHECK(norm == doctest::Approx(std::sqrt(2.0) * 100.0));
  CHECK(p.value()(0, 0) < 1.0);
  CHECK(cosine_lr(1.0, 0, 10) == doctest::Approx(1.0));
  CHECK(cosine_lr(1.0, 10, 10) == doctest::Approx(0.0));
}

TEST_CASE("param store groups, trainability and serialization") {
  ParamStore store;
  Rng rng(8);
  Linear::create(store, "f_e", 2, 3, 0.1, rng);
  Linear::create(store, "lm.head", 3, 3, 0.1, rng);
  CHECK(store.groups() == std::set<std::string>{"f_e", "lm"});
  store.set_trainable({"f_e"});
  CHECK(store.trainable_vars().size() == 2);
  CHECK_FALSE(store.get("lm.head.weight").requires_grad());
  const auto before = store.serialize({"lm"});
  store.get("f_e.weight").node()->value(0, 0) += 1.0;
  CHECK(store.serialize({"lm"}) == before);
  CHECK(store.fingerprint({"f_e"}) != 0);
  CHECK(store.parameter_count() == 2 * 3 + 3 + 3 * 3 + 3);
}

TEST_CASE("transformer layer with zeroed output projections is the identity") {
  ParamStore store;
  Rng rng(9);
  auto layer = TransformerLayer::create(store, "r", 8, 2, 4, false, 0.3, rng);
  layer.zero_output_projections();
  const Matrix x = random_matrix(5, 8, rng);
  CHECK((layer(Var::constant(x)).value().array() == x.array()).all());
}
