// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "scenechat/core/rng.hpp"
#include "scenechat/nn/ops.hpp"
#include "scenechat/nn/param_store.hpp"

namespace scenechat::nn {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  static Linear create(ParamStore& store, const std::string& name, int in, int out, double stddev, Rng& rng);
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  int in_features() const { return static_cast<int>(weight.rows()); }
  int out_features() const { return static_cast<int>(weight.cols()); }
};

struct LayerNorm {
  Var gamma;
  Var beta;

  static LayerNorm create(ParamStore& store, const std::string& name, int width);
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
};

/// Pre-normalization transformer layer:
///   x1 = x + Wo * attn(LN1(x)),  out = x1 + FFN(LN2(x1)).
/// Used bidirectionally for the relation module and causally in the LM.
struct TransformerLayer {
  LayerNorm ln1;
  Linear wq, wk, wv, wo;
  LayerNorm ln2;
  Linear fc1, fc2;
  int heads = 1;
  bool causal = false;

  static TransformerLayer create(ParamStore& store, const std::string& name, int width, int heads,
                                 int ffn_mult, bool causal, double stddev, Rng& rng);
  Var operator()(const Var& x, std::span<const std::uint8_t> key_mask = {}) const;

  /// Zeroes the attention output projection and the second FFN layer so the
  /// layer computes the identity on its residual stream.
  void zero_output_projections();
};

}  // namespace scenechat::nn
