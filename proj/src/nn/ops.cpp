// SPDX-License-Identifier: Apache-2.0

#include "scenechat/nn/ops.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "scenechat/core/error.hpp"

namespace scenechat::nn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw InvalidInput(what);
}

bool wants(const Node& self, std::size_t i) {
  return self.parents.size() > i && self.parents[i] && self.parents[i]->requires_grad;
}

Matrix& pgrad(Node& self, std::size_t i) { return self.parents[i]->grad_buffer(); }
const Matrix& pval(const Node& self, std::size_t i) { return self.parents[i]->value; }

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix out = a.value() * b.value();
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) pgrad(self, 0).noalias() += self.grad * pval(self, 1).transpose();
    if (wants(self, 1)) pgrad(self, 1).noalias() += pval(self, 0).transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Matrix out = a.value() * b.value().transpose();
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) pgrad(self, 0).noalias() += self.grad * pval(self, 1);
    if (wants(self, 1)) pgrad(self, 1).noalias() += self.grad.transpose() * pval(self, 0);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(x.cols() == w.rows(), "linear: input width does not match weight rows");
  Matrix out = x.value() * w.value();
  if (b.defined()) {
    require(b.rows() == 1 && b.cols() == w.cols(), "linear: bias shape");
    out.rowwise() += b.value().row(0);
  }
  std::vector<Var> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return make_node(std::move(out), std::move(parents), [](Node& self) {
    if (wants(self, 0)) pgrad(self, 0).noalias() += self.grad * pval(self, 1).transpose();
    if (wants(self, 1)) pgrad(self, 1).noalias() += pval(self, 0).transpose() * self.grad;
    if (wants(self, 2)) pgrad(self, 2) += self.grad.colwise().sum();
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return make_node(a.value() + b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) pgrad(self, 0) += self.grad;
    if (wants(self, 1)) pgrad(self, 1) += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return make_node(a.value() - b.value(), {a, b}, [](Node& self) {
    if (wants(self, 0)) pgrad(self, 0) += self.grad;
    if (wants(self, 1)) pgrad(self, 1) -= self.grad;
  });
}

Var scale(const Var& a, double s) {
  return make_node(a.value() * s, {a}, [s](Node& self) {
    if (wants(self, 0)) pgrad(self, 0) += self.grad * s;
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_node(std::move(out), {a}, [](Node& self) {
    if (wants(self, 0)) pgrad(self, 0).array() += self.grad(0, 0);
  });
}

Var relu(const Var& x) {
  return make_node(x.value().cwiseMax(0.0), {x}, [](Node& self) {
    if (!wants(self, 0)) return;
    pgrad(self, 0).array() += (pval(self, 0).array() > 0.0).select(self.grad.array(), 0.0);
  });
}

Var gelu(const Var& x) {
  Matrix out = x.value().unaryExpr([](double v) { return gelu_value(v); });
  return make_node(std::move(out), {x}, [](Node& self) {
    if (!wants(self, 0)) return;
    pgrad(self, 0).array() +=
        self.grad.array() * pval(self, 0).unaryExpr([](double v) { return gelu_grad(v); }).array();
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  require(gamma.rows() == 1 && gamma.cols() == d && beta.rows() == 1 && beta.cols() == d,
          "layer_norm: gain/bias shape");
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mean).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mean) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return make_node(std::move(out), {x, gamma, beta},
                   [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     const Matrix& g = self.grad;
                     if (wants(self, 1)) pgrad(self, 1) += (g.array() * xhat.array()).colwise().sum().matrix();
                     if (wants(self, 2)) pgrad(self, 2) += g.colwise().sum();
                     if (!wants(self, 0)) return;
                     const auto& gam = pval(self, 1);
                     Matrix& dx = pgrad(self, 0);
                     const double d_inv = 1.0 / static_cast<double>(xhat.cols());
                     for (Eigen::Index i = 0; i < xhat.rows(); ++i) {
                       const Eigen::ArrayXd dxhat = (g.row(i).array() * gam.row(0).array()).transpose();
                       const Eigen::ArrayXd xh = xhat.row(i).array().transpose();
                       const double m1 = dxhat.sum() * d_inv;
                       const double m2 = (dxhat * xh).sum() * d_inv;
                       dx.row(i).array() += ((dxhat - m1 - xh * m2) * inv_std(i)).transpose();
                     }
                   });
}

std::vector<Matrix> attention_probabilities(const Matrix& q, const Matrix& k, const AttentionOptions& options) {
  const Eigen::Index n = q.rows();
  const Eigen::Index m = k.rows();
  const Eigen::Index d = q.cols();
  require(k.cols() == d, "attention: shape mismatch");
  require(options.heads > 0 && d % options.heads == 0, "attention: width not divisible by heads");
  require(options.key_mask.empty() || static_cast<Eigen::Index>(options.key_mask.size()) == m,
          "attention: key mask length");
  const Eigen::Index dh = d / options.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index offset = m - n;  // causal alignment when keys include a prefix

  std::vector<Matrix> probs(static_cast<std::size_t>(options.heads));
  for (int h = 0; h < options.heads; ++h) {
    const Eigen::Index c0 = h * dh;
    Matrix scores = q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose();
    scores *= inv_sqrt;
    Matrix p = Matrix::Zero(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < m; ++j) {
        const bool allowed = (!options.causal || j <= i + offset) &&
                             (options.key_mask.empty() || options.key_mask[static_cast<std::size_t>(j)] != 0);
        if (allowed) mx = std::max(mx, scores(i, j));
      }
      if (!std::isfinite(mx)) continue;  // fully masked row attends to nothing
      double total = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        const bool allowed = (!options.causal || j <= i + offset) &&
                             (options.key_mask.empty() || options.key_mask[static_cast<std::size_t>(j)] != 0);
        if (allowed) {
          p(i, j) = std::exp(scores(i, j) - mx);
          total += p(i, j);
        }
      }
      p.row(i) /= total;
    }
    probs[static_cast<std::size_t>(h)] = std::move(p);
  }
  return probs;
}

Var attention(const Var& q, const Var& k, const Var& v, const AttentionOptions& options) {
  const Eigen::Index n = q.rows();
  const Eigen::Index m = k.rows();
  const Eigen::Index d = q.cols();
  require(v.cols() == d && v.rows() == m, "attention: shape mismatch");
  std::vector<Matrix> probs = attention_probabilities(q.value(), k.value(), options);
  const Eigen::Index dh = d / options.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix out = Matrix::Zero(n, d);
  for (int h = 0; h < options.heads; ++h) {
    const Eigen::Index c0 = h * dh;
    out.middleCols(c0, dh).noalias() = probs[static_cast<std::size_t>(h)] * v.value().middleCols(c0, dh);
  }

  const int heads = options.heads;
  return make_node(std::move(out), {q, k, v},
                   [probs = std::move(probs), heads, dh, inv_sqrt](Node& self) {
                     for (int h = 0; h < heads; ++h) {
                       const Eigen::Index c0 = h * dh;
                       const Matrix& p = probs[static_cast<std::size_t>(h)];
                       const auto go = self.grad.middleCols(c0, dh);
                       if (wants(self, 2)) pgrad(self, 2).middleCols(c0, dh).noalias() += p.transpose() * go;
                       if (!wants(self, 0) && !wants(self, 1)) continue;
                       Matrix dp = go * pval(self, 2).middleCols(c0, dh).transpose();
                       const Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
                       Matrix ds = (p.array() * (dp.array().colwise() - rowdot.array())).matrix();
                       ds *= inv_sqrt;
                       if (wants(self, 0)) pgrad(self, 0).middleCols(c0, dh).noalias() += ds * pval(self, 1).middleCols(c0, dh);
                       if (wants(self, 1)) pgrad(self, 1).middleCols(c0, dh).noalias() += ds.transpose() * pval(self, 0).middleCols(c0, dh);
                     }
                   });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const Eigen::Index d = parts.front().cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    require(p.cols() == d, "concat_rows: width mismatch");
    total += p.rows();
  }
  Matrix out(total, d);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_node(std::move(out), parts, [](Node& self) {
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const Eigen::Index rows = self.parents[i]->value.rows();
      if (wants(self, i)) pgrad(self, i) += self.grad.middleRows(row, rows);
      row += rows;
    }
  });
}

Var slice_rows(const Var& x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.rows(), "slice_rows: out of range");
  return make_node(x.value().middleRows(start, count), {x}, [start, count](Node& self) {
    if (wants(self, 0)) pgrad(self, 0).middleRows(start, count) += self.grad;
  });
}

Var gather_rows(const Var& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < table.rows(), "gather_rows: id out of range");
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return make_node(std::move(out), {table}, [idx = std::move(idx)](Node& self) {
    if (!wants(self, 0)) return;
    Matrix& g = pgrad(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var mix_rows(const Var& table, std::span<const int> ids, const Var& slots) {
  const Eigen::Index d = table.cols();
  require(!slots.defined() || slots.cols() == d, "mix_rows: slot width differs from table width");
  Matrix out(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id >= 0) {
      require(id < table.rows(), "mix_rows: token id out of range");
      out.row(static_cast<Eigen::Index>(i)) = table.value().row(id);
    } else {
      require(slots.defined() && -id - 1 < slots.rows(), "mix_rows: slot index out of range");
      out.row(static_cast<Eigen::Index>(i)) = slots.value().row(-id - 1);
    }
  }
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<Var> parents{table};
  if (slots.defined()) parents.push_back(slots);
  return make_node(std::move(out), std::move(parents), [idx = std::move(idx)](Node& self) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto row = self.grad.row(static_cast<Eigen::Index>(i));
      if (idx[i] >= 0) {
        if (wants(self, 0)) pgrad(self, 0).row(idx[i]) += row;
      } else if (wants(self, 1)) {
        pgrad(self, 1).row(-idx[i] - 1) += row;
      }
    }
  });
}

Var max_pool_rows(const Var& x) {
  require(x.rows() > 0, "max_pool_rows: empty input");
  const Eigen::Index d = x.cols();
  Matrix out(1, d);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(d));
  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < x.rows(); ++r) {
      if (x.value()(r, c) > x.value()(best, c)) best = r;
    }
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = x.value()(best, c);
  }
  return make_node(std::move(out), {x}, [arg = std::move(arg)](Node& self) {
    if (!wants(self, 0)) return;
    Matrix& g = pgrad(self, 0);
    for (std::size_t c = 0; c < arg.size(); ++c) {
      g(arg[c], static_cast<Eigen::Index>(c)) += self.grad(0, static_cast<Eigen::Index>(c));
    }
  });
}

Var mean_rows(const Var& x) {
  require(x.rows() > 0, "mean_rows: empty input");
  Matrix out = x.value().colwise().mean();
  const double inv = 1.0 / static_cast<double>(x.rows());
  return make_node(std::move(out), {x}, [inv](Node& self) {
    if (wants(self, 0)) pgrad(self, 0).rowwise() += self.grad.row(0) * inv;
  });
}

Var l2_normalize_rows(const Var& x) {
  Eigen::VectorXd norms = x.value().rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) throw InvalidInput("l2_normalize_rows: zero-norm row");
  }
  Matrix out = x.value().array().colwise() / norms.array();
  Matrix y = out;
  return make_node(std::move(out), {x}, [y = std::move(y), norms = std::move(norms)](Node& self) {
    if (!wants(self, 0)) return;
    Matrix& g = pgrad(self, 0);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = y.row(i).dot(self.grad.row(i));
      g.row(i) += (self.grad.row(i) - y.row(i) * dot) / norms(i);
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> targets) {
  require(static_cast<Eigen::Index>(targets.size()) == logits.rows(), "cross_entropy: target count");
  const Eigen::Index n = logits.rows();
  const Eigen::Index v = logits.cols();
  Matrix probs = Matrix::Zero(n, v);
  double total = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0) continue;
    require(t < v, "cross_entropy: target out of range");
    const double mx = logits.value().row(i).maxCoeff();
    const Eigen::ArrayXd e = (logits.value().row(i).array() - mx).exp().transpose();
    const double z = e.sum();
    probs.row(i) = (e / z).transpose();
    total += -(logits.value()(i, t) - mx - std::log(z));
    ++count;
  }
  if (count == 0) throw InvalidInput("cross_entropy: no target positions");
  Matrix out(1, 1);
  out(0, 0) = total / count;
  std::vector<int> tg(targets.begin(), targets.end());
  return make_node(std::move(out), {logits},
                   [probs = std::move(probs), tg = std::move(tg), count](Node& self) {
                     if (!wants(self, 0)) return;
                     const double s = self.grad(0, 0) / count;
                     Matrix& g = pgrad(self, 0);
                     for (std::size_t i = 0; i < tg.size(); ++i) {
                       if (tg[i] < 0) continue;
                       const auto r = static_cast<Eigen::Index>(i);
                       g.row(r) += probs.row(r) * s;
                       g(r, tg[i]) -= s;
                     }
                   });
}

Var cosine_loss(const Var& z, const Var& y) {
  require(z.rows() == y.rows() && z.cols() == y.cols() && z.rows() > 0, "cosine_loss: shape mismatch");
  const Eigen::Index n = z.rows();
  Eigen::VectorXd zn = z.value().rowwise().norm();
  Eigen::VectorXd yn = y.value().rowwise().norm();
  Eigen::VectorXd cos(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (zn(i) == 0.0) throw InvalidInput("cosine_loss: degenerate (zero-norm) embedding in row " + std::to_string(i));
    if (!(yn(i) > 0.0)) throw InvalidInput("cosine_loss: zero-norm target in row " + std::to_string(i));
    cos(i) = z.value().row(i).dot(y.value().row(i)) / (zn(i) * yn(i));
  }
  Matrix out(1, 1);
  out(0, 0) = (1.0 - cos.array()).mean();
  return make_node(std::move(out), {z, y},
                   [zn = std::move(zn), yn = std::move(yn), cos = std::move(cos)](Node& self) {
                     const double s = self.grad(0, 0) / static_cast<double>(cos.size());
                     const Matrix& zv = pval(self, 0);
                     const Matrix& yv = pval(self, 1);
                     for (Eigen::Index i = 0; i < cos.size(); ++i) {
                       if (wants(self, 0)) {
                         pgrad(self, 0).row(i) -=
                             s * (yv.row(i) / (zn(i) * yn(i)) - cos(i) * zv.row(i) / (zn(i) * zn(i)));
                       }
                       if (wants(self, 1)) {
                         pgrad(self, 1).row(i) -=
                             s * (zv.row(i) / (zn(i) * yn(i)) - cos(i) * yv.row(i) / (yn(i) * yn(i)));
                       }
                     }
                   });
}

}  // namespace scenechat::nn
