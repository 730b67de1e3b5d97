// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace scenechat::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// One value in a reverse-mode computation graph.
///
/// Leaves are parameters or constants; interior nodes are created by the
/// functions in ops.hpp. A node only records parents and a backward closure
/// when at least one input requires a gradient, so graphs built from frozen
/// parameters cost no more than plain evaluation.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Gradient buffer, zero-initialized on first use.
  Matrix& grad_buffer() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Empty until a backward pass reaches this node.
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double item() const { return node_->value(0, 0); }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Seeds d(root)/d(root) = 1 and propagates to every reachable node that
/// requires a gradient. Leaf gradients accumulate across calls.
void backward(const Var& root);

/// Builds an interior node. `fn` is only attached when some parent requires
/// a gradient.
Var make_node(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn);

}  // namespace scenechat::nn
