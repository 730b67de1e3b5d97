// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "scenechat/nn/tensor.hpp"

namespace scenechat::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global gradient-norm clip; <= 0 disables clipping.
  double clip_norm = 1.0;
};

/// Adaptive-moment optimizer over a fixed set of parameters.
class Adam {
 public:
  Adam(std::vector<Var> params, AdamConfig config = {});

  /// Applies one update with learning rate `lr`, scaling accumulated
  /// gradients by `grad_scale` first (e.g. 1/batch). Returns the pre-clip
  /// gradient norm.
  double step(double lr, double grad_scale = 1.0);
  void zero_grad();
  int steps() const { return steps_; }

 private:
  std::vector<Var> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamConfig config_;
  int steps_ = 0;
};

/// Half-cosine decay from `base` to 0 over `total` steps.
double cosine_lr(double base, int step, int total);

}  // namespace scenechat::nn
