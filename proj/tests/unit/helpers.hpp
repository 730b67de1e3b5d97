// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "scenechat/core/rng.hpp"
#include "scenechat/nn/tensor.hpp"

namespace testutil {

inline scenechat::nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, scenechat::Rng& rng, double sd = 1.0) {
  scenechat::nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * sd;
  return m;
}

inline std::string data_path(const std::string& rel) { return std::string(SCENECHAT_TEST_DATA) + "/" + rel; }

inline double max_abs_diff(const scenechat::nn::Matrix& a, const scenechat::nn::Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace testutil
