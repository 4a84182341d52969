// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over batched Eigen matrices. Rows are samples,
// columns are features. A Tape records every op applied to its Vars; calling
// backward() on a 1x1 Var accumulates gradients into the Parameters that fed
// the graph.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace usfl::nn {

using Matrix = Eigen::MatrixXd;

class Parameter {
 public:
  Parameter(std::string name, Matrix value);

  const std::string& name() const { return name_; }
  Matrix& value() { return value_; }
  const Matrix& value() const { return value_; }
  Matrix& grad() { return grad_; }
  const Matrix& grad() const { return grad_; }
  Eigen::Index size() const { return value_.size(); }
  void zero_grad() { grad_.setZero(); }

 private:
  std::string name_;
  Matrix value_;
  Matrix grad_;
};

/// Owns parameters in registration order; addresses stay stable.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix value);

  size_t count() const { return params_.size(); }
  Eigen::Index scalar_count() const;
  Parameter& at(size_t i) { return *params_.at(i); }
  const Parameter& at(size_t i) const { return *params_.at(i); }
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  void zero_grad();
  double grad_norm() const;
  /// Rescales gradients so their global L2 norm is at most max_norm.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape& tape() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id, std::uint64_t generation)
      : tape_(tape), id_(id), generation_(generation) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
  std::uint64_t generation_ = 0;
};

class Tape {
 public:
  /// Receives the node's output gradient and pushes into its parents.
  using Backward = std::function<void(const Matrix& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  /// Records an op. `parents` are the Vars the op reads; `fn` may be empty
  /// when no parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn);

  /// Seeds d loss / d loss = 1 and runs the recorded ops in reverse. Throws
  /// InvalidArgument for a Var from another tape or a cleared recording, or
  /// a non-scalar loss.
  void backward(const Var& loss);

  /// Drops every recorded node; Vars from before the clear become invalid.
  void clear();
  size_t size() const { return nodes_.size(); }

  const Matrix& value(const Var& v) const;
  const Matrix& grad(const Var& v) const;
  bool requires_grad(const Var& v) const;
  /// Adds `g` into the gradient of v (no-op for constants).
  void accumulate(const Var& v, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    Backward backward;
  };

  const Node& node(const Var& v) const;
  Node& node(const Var& v);

  std::vector<Node> nodes_;
  std::uint64_t generation_ = 1;
};

// Ops ------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
/// x * w + b, with b a 1 x out row broadcast over samples.
Var linear(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var leaky_relu(const Var& a, double slope);
Var exp(const Var& a);
Var tanh(const Var& a);
/// a + c elementwise.
Var shift(const Var& a, double c);
/// Elementwise clamp; gradient is zero where the bound is active.
Var clamp(const Var& a, double lo, double hi);
Var sum(const Var& a);
Var mean(const Var& a);
/// Mean of a (n x 1) with per-row weights; weights sum must be > 0.
Var weighted_mean(const Var& a, const Matrix& weights);
Var column(const Var& a, Eigen::Index j);
Var mse(const Var& prediction, const Matrix& target);

/// Single-head scaled dot-product self-attention: each row of x (n x T*D) is
/// read as T tokens of width D; wq, wk, wv are D x D. Returns softmax(Q K^T /
/// sqrt(D)) V flattened back to n x T*D.
Var attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, int tokens,
              int dim);

/// Softmax restricted to mask == 1 entries (mask is n x k, each row has at
/// least one valid entry). Masked entries have probability 0.
Matrix masked_softmax(const Matrix& logits, const Matrix& mask);
/// log p(action) for each row; actions index columns.
Var categorical_log_prob(const Var& logits, const Matrix& mask,
                         const std::vector<int>& actions);
/// -sum p log p per row over the valid entries.
Var categorical_entropy(const Var& logits, const Matrix& mask);

/// log N(z; mean, exp(log_std)^2) per row; all arguments n x 1.
Var gaussian_log_prob(const Var& mean, const Var& log_std, const Matrix& z);
/// 0.5 * log(2 pi e) + log_std per row.
Var gaussian_entropy(const Var& log_std);

/// log((1 - eps) exp(lp) + eps exp(alt)) elementwise; alt and eps are
/// constants of lp's shape with eps in [0, 1).
Var log_mixture(const Var& lp, const Matrix& alt, const Matrix& eps);
Var log_mixture(const Var& lp, const Matrix& alt, double eps);

/// Weighted mean over rows of min(r A, clip(r, 1-eps, 1+eps) A) with
/// r = exp(logp_new - logp_old).
Var clipped_surrogate(const Var& logp_new, const Matrix& logp_old, const Matrix& advantages,
                      const Matrix& weights, double clip_eps);

}  // namespace usfl::nn
