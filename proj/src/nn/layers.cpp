// SPDX-License-Identifier: Apache-2.0

#include "scenechat/nn/layers.hpp"

namespace scenechat::nn {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
  return m;
}

Linear Linear::create(ParamStore& store, const std::string& name, int in, int out, double stddev, Rng& rng) {
  Linear l;
  l.weight = store.add(name + ".weight", normal_matrix(in, out, stddev, rng));
  l.bias = store.add(name + ".bias", Matrix::Zero(1, out));
  return l;
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, int width) {
  LayerNorm ln;
  ln.gamma = store.add(name + ".gamma", Matrix::Ones(1, width));
  ln.beta = store.add(name + ".beta", Matrix::Zero(1, width));
  return ln;
}

TransformerLayer TransformerLayer::create(ParamStore& store, const std::string& name, int width, int heads,
                                          int ffn_mult, bool causal, double stddev, Rng& rng) {
  TransformerLayer t;
  t.heads = heads;
  t.causal = causal;
  t.ln1 = LayerNorm::create(store, name + ".ln1", width);
  t.wq = Linear::create(store, name + ".attn.q", width, width, stddev, rng);
  t.wk = Linear::create(store, name + ".attn.k", width, width, stddev, rng);
  t.wv = Linear::create(store, name + ".attn.v", width, width, stddev, rng);
  t.wo = Linear::create(store, name + ".attn.o", width, width, stddev, rng);
  t.ln2 = LayerNorm::create(store, name + ".ln2", width);
  t.fc1 = Linear::create(store, name + ".ffn.fc1", width, width * ffn_mult, stddev, rng);
  t.fc2 = Linear::create(store, name + ".ffn.fc2", width * ffn_mult, width, stddev, rng);
  return t;
}

Var TransformerLayer::operator()(const Var& x, std::span<const std::uint8_t> key_mask) const {
  const Var a = ln1(x);
  AttentionOptions opts;
  opts.heads = heads;
  opts.causal = causal;
  opts.key_mask = key_mask;
  const Var att = attention(wq(a), wk(a), wv(a), opts);
  const Var x1 = add(x, wo(att));
  const Var b = ln2(x1);
  return add(x1, fc2(gelu(fc1(b))));
}

void TransformerLayer::zero_output_projections() {
  wo.weight.mutable_value().setZero();
  wo.bias.mutable_value().setZero();
  fc2.weight.mutable_value().setZero();
  fc2.bias.mutable_value().setZero();
}

}  // namespace scenechat::nn
