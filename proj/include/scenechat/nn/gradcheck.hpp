// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scenechat/nn/tensor.hpp"

namespace scenechat::nn {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the element-wise relative error.
  double floor = 1e-6;
  /// Elements probed per parameter; 0 probes every element.
  std::size_t max_elements = 0;
};

struct GradcheckGroup {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Compares analytic gradients of `loss_fn` with central finite differences.
/// The relative error of one element is |a - n| / max(|a|, |n|, floor).
/// Each entry of `params` must be a leaf that requires a gradient.
GradcheckReport gradcheck(const std::function<Var()>& loss_fn,
                          const std::vector<std::pair<std::string, Var>>& params,
                          const GradcheckOptions& options = {});

}  // namespace scenechat::nn
