// SPDX-License-Identifier: Apache-2.0

#include "scenechat/nn/optim.hpp"

#include <cmath>
#include <numbers>

namespace scenechat::nn {

Adam::Adam(std::vector<Var> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

double Adam::step(double lr, double grad_scale) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p.grad().size() != 0) sq += p.grad().squaredNorm();
  }
  const double norm = std::sqrt(sq) * grad_scale;
  double factor = grad_scale;
  if (config_.clip_norm > 0.0 && norm > config_.clip_norm) factor *= config_.clip_norm / norm;

  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, steps_);
  const double bc2 = 1.0 - std::pow(config_.beta2, steps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Var& p = params_[i];
    if (p.grad().size() == 0) continue;
    const Matrix g = p.grad() * factor;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
    p.mutable_value().array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(double base, int step, int total) {
  if (total <= 1) return base;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace scenechat::nn
