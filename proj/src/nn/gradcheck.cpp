// SPDX-License-Identifier: Apache-2.0

#include "scenechat/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "scenechat/core/error.hpp"

namespace scenechat::nn {

GradcheckReport gradcheck(const std::function<Var()>& loss_fn,
                          const std::vector<std::pair<std::string, Var>>& params,
                          const GradcheckOptions& options) {
  std::vector<Var> vars;
  for (const auto& [name, var] : params) {
    if (!var.requires_grad()) throw InvalidInput("gradcheck: parameter " + name + " does not require grad");
    vars.push_back(var);
  }
  for (auto& v : vars) v.zero_grad();
  backward(loss_fn());

  GradcheckReport report;
  for (std::size_t p = 0; p < vars.size(); ++p) {
    Var& var = vars[p];
    GradcheckGroup group;
    group.name = params[p].first;
    const Matrix analytic = var.grad().size() == 0 ? Matrix::Zero(var.rows(), var.cols()) : var.grad();
    const auto size = static_cast<std::size_t>(var.value().size());
    const std::size_t probes = options.max_elements == 0 ? size : std::min(size, options.max_elements);
    // Evenly strided probe positions keep the check deterministic.
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t idx = probes == size ? k : (k * size) / probes;
      double& slot = var.mutable_value().data()[idx];
      const double saved = slot;
      slot = saved + options.step;
      const double up = loss_fn().item();
      slot = saved - options.step;
      const double down = loss_fn().item();
      slot = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic.data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      group.max_rel_error = std::max(group.max_rel_error, std::isfinite(rel) ? rel : INFINITY);
      ++group.checked;
    }
    group.passed = group.max_rel_error < options.tolerance;
    report.max_rel_error = std::max(report.max_rel_error, group.max_rel_error);
    report.passed = report.passed && group.passed;
    report.groups.push_back(group);
  }
  for (auto& v : vars) v.zero_grad();
  return report;
}

}  // namespace scenechat::nn
