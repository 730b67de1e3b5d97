// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scenechat/nn/tensor.hpp"

namespace scenechat::nn {

Var matmul(const Var& a, const Var& b);
/// a * b^T
Var matmul_nt(const Var& a, const Var& b);
/// x * w + b, with `b` a 1 x out row broadcast over rows (may be undefined).
Var linear(const Var& x, const Var& w, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var sum(const Var& a);

Var relu(const Var& x);
/// tanh approximation of GELU.
Var gelu(const Var& x);

/// Row-wise layer normalization with learned gain and bias (both 1 x d).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

struct AttentionOptions {
  int heads = 1;
  bool causal = false;
  /// Optional per-key flag; keys with 0 are never attended to.
  std::span<const std::uint8_t> key_mask{};
};

/// Per-head softmax weights (n x m each). Rows whose keys are all masked
/// are zero.
std::vector<Matrix> attention_probabilities(const Matrix& q, const Matrix& k, const AttentionOptions& options);

/// Scaled dot-product attention over the rows of q, k, v (all n x d),
/// split into `heads` column blocks.
Var attention(const Var& q, const Var& k, const Var& v, const AttentionOptions& options);

Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& table, std::span<const int> ids);

/// Row i is table[ids[i]] when ids[i] >= 0, otherwise slots[-ids[i] - 1].
Var mix_rows(const Var& table, std::span<const int> ids, const Var& slots);

/// Column-wise maximum (1 x d). Ties route the gradient to the first row.
Var max_pool_rows(const Var& x);
Var mean_rows(const Var& x);
Var l2_normalize_rows(const Var& x);

/// Mean softmax cross-entropy over rows whose target is >= 0.
Var cross_entropy(const Var& logits, std::span<const int> targets);

/// Mean of 1 - cos(z_i, y_i) over rows. Throws on a zero-norm row of z.
Var cosine_loss(const Var& z, const Var& y);

/// Scalar GELU helpers shared with the inference path.
double gelu_value(double x);
double gelu_grad(double x);

}  // namespace scenechat::nn
