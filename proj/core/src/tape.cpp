// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "usfl/error.hpp"

namespace usfl::nn {

Parameter::Parameter(std::string name, Matrix value)
    : name_(std::move(name)), value_(std::move(value)),
      grad_(Matrix::Zero(value_.rows(), value_.cols())) {}

Parameter& ParameterSet::add(std::string name, Matrix value) {
  if (find(name)) throw InvalidArgument("duplicate parameter name " + name);
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Eigen::Index ParameterSet::scalar_count() const {
  Eigen::Index n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p->name() == name) return p.get();
  }
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad().squaredNorm();
  return std::sqrt(sq);
}

double ParameterSet::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& p : params_) p->grad() *= s;
  }
  return norm;
}

// Var / Tape -------------------------------------------------------------------

const Matrix& Var::value() const {
  if (!tape_) throw InvalidArgument("var is not attached to a tape");
  return tape_->value(*this);
}

const Matrix& Var::grad() const {
  if (!tape_) throw InvalidArgument("var is not attached to a tape");
  return tape_->grad(*this);
}

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw InvalidArgument("var is not a scalar");
  return v(0, 0);
}

const Tape::Node& Tape::node(const Var& v) const {
  if (v.tape_ != this) throw InvalidArgument("var belongs to a different tape");
  if (v.generation_ != generation_ || v.id_ < 0 ||
      v.id_ >= static_cast<int>(nodes_.size())) {
    throw InvalidArgument("var refers to a cleared or unrecorded graph");
  }
  return nodes_[static_cast<size_t>(v.id_)];
}

Tape::Node& Tape::node(const Var& v) {
  return const_cast<Node&>(std::as_const(*this).node(v));
}

const Matrix& Tape::value(const Var& v) const { return node(v).value; }

const Matrix& Tape::grad(const Var& v) const {
  const auto& n = node(v);
  if (n.grad.size() == 0) throw InvalidArgument("var has no gradient");
  return n.grad;
}

bool Tape::requires_grad(const Var& v) const { return node(v).requires_grad; }

void Tape::accumulate(const Var& v, const Matrix& g) {
  auto& n = node(v);
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
    throw InvalidArgument("gradient shape mismatch");
  }
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1, generation_);
}

Var Tape::param(Parameter& p) {
  nodes_.push_back(Node{p.value(), {}, true, &p, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1, generation_);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward fn) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || node(p).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs && fn, nullptr,
                        needs ? std::move(fn) : Backward{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1, generation_);
}

void Tape::backward(const Var& loss) {
  auto& root = node(loss);
  if (root.value.size() != 1) throw InvalidArgument("backward: loss must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  for (int i = loss.id_; i >= 0; --i) {
    auto& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param) n.param->grad() += n.grad;
    if (n.backward) n.backward(n.grad, *this);
  }
}

void Tape::clear() {
  nodes_.clear();
  ++generation_;
}

Tape& Var::tape() const {
  if (!tape_) throw InvalidArgument("var is not attached to a tape");
  return *tape_;
}

// Ops ------------------------------------------------------------------------

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw InvalidArgument("operands live on different tapes");
  return a.tape();
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(op) + ": shape mismatch");
  }
}

void check_column(const Matrix& m, Eigen::Index rows, const char* op) {
  if (m.rows() != rows || m.cols() != 1) {
    throw InvalidArgument(std::string(op) + ": expected a " + std::to_string(rows) +
                          " x 1 operand");
  }
}

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

}  // namespace

Var matmul(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dimension mismatch");
  return t.record(a.value() * b.value(), {a, b}, [a, b](const Matrix& g, Tape& tp) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * b.value().transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, a.value().transpose() * g);
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  auto& t = same_tape(x, w);
  same_tape(x, b);
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw InvalidArgument("linear: expected x (n x " + std::to_string(w.rows()) + "), got n x " +
                          std::to_string(x.cols()));
  }
  Matrix y = x.value() * w.value();
  y.rowwise() += b.value().row(0);
  return t.record(std::move(y), {x, w, b}, [x, w, b](const Matrix& g, Tape& tp) {
    if (tp.requires_grad(x)) tp.accumulate(x, g * w.value().transpose());
    if (tp.requires_grad(w)) tp.accumulate(w, x.value().transpose() * g);
    if (tp.requires_grad(b)) tp.accumulate(b, g.colwise().sum());
  });
}

Var add(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  check_same_shape(a, b, "add");
  return t.record(a.value() + b.value(), {a, b}, [a, b](const Matrix& g, Tape& tp) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  check_same_shape(a, b, "sub");
  return t.record(a.value() - b.value(), {a, b}, [a, b](const Matrix& g, Tape& tp) {
    tp.accumulate(a, g);
    if (tp.requires_grad(b)) tp.accumulate(b, -g);
  });
}

Var mul(const Var& a, const Var& b) {
  auto& t = same_tape(a, b);
  check_same_shape(a, b, "mul");
  return t.record(a.value().cwiseProduct(b.value()), {a, b},
                  [a, b](const Matrix& g, Tape& tp) {
                    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(b.value()));
                    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(a.value()));
                  });
}

Var scale(const Var& a, double s) {
  return a.tape().record(a.value() * s, {a},
                         [a, s](const Matrix& g, Tape& tp) { tp.accumulate(a, g * s); });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix y = a.value().unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return a.tape().record(std::move(y), {a}, [a, slope](const Matrix& g, Tape& tp) {
    const Matrix d = a.value().unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var exp(const Var& a) {
  Matrix y = a.value().array().exp().matrix();
  Matrix yc = y;
  return a.tape().record(std::move(y), {a}, [a, yc](const Matrix& g, Tape& tp) {
    tp.accumulate(a, g.cwiseProduct(yc));
  });
}

Var tanh(const Var& a) {
  Matrix y = a.value().array().tanh().matrix();
  Matrix d = (1.0 - y.array().square()).matrix();
  return a.tape().record(std::move(y), {a}, [a, d](const Matrix& g, Tape& tp) {
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var shift(const Var& a, double c) {
  Matrix y = a.value().array() + c;
  return a.tape().record(std::move(y), {a}, [a](const Matrix& g, Tape& tp) { tp.accumulate(a, g); });
}

Var clamp(const Var& a, double lo, double hi) {
  Matrix y = a.value().cwiseMax(lo).cwiseMin(hi);
  return a.tape().record(std::move(y), {a}, [a, lo, hi](const Matrix& g, Tape& tp) {
    const Matrix d = a.value().unaryExpr([lo, hi](double v) {
      return (v > lo && v < hi) ? 1.0 : 0.0;
    });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

Var sum(const Var& a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape().record(std::move(y), {a}, [a](const Matrix& g, Tape& tp) {
    tp.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) {
  if (a.value().size() == 0) throw InvalidArgument("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var weighted_mean(const Var& a, const Matrix& weights) {
  check_column(weights, a.rows(), "weighted_mean");
  if (a.cols() != 1) throw InvalidArgument("weighted_mean: operand must be n x 1");
  const double total = weights.sum();
  if (!(total > 0.0)) throw InvalidArgument("weighted_mean: weights sum to zero");
  Matrix y(1, 1);
  y(0, 0) = a.value().cwiseProduct(weights).sum() / total;
  Matrix w = weights / total;
  return a.tape().record(std::move(y), {a}, [a, w](const Matrix& g, Tape& tp) {
    tp.accumulate(a, w * g(0, 0));
  });
}

Var column(const Var& a, Eigen::Index j) {
  if (j < 0 || j >= a.cols()) throw InvalidArgument("column: index out of range");
  Matrix y = a.value().col(j);
  return a.tape().record(std::move(y), {a}, [a, j](const Matrix& g, Tape& tp) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.col(j) = g;
    tp.accumulate(a, full);
  });
}

Var mse(const Var& prediction, const Matrix& target) {
  if (target.rows() != prediction.rows() || target.cols() != prediction.cols()) {
    throw InvalidArgument("mse: shape mismatch");
  }
  const Matrix diff = prediction.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix y(1, 1);
  y(0, 0) = diff.squaredNorm() / n;
  return prediction.tape().record(std::move(y), {prediction},
                                  [prediction, diff, n](const Matrix& g, Tape& tp) {
                                    tp.accumulate(prediction, diff * (2.0 * g(0, 0) / n));
                                  });
}

// Attention ------------------------------------------------------------------

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix tokens_of(const Matrix& x, Eigen::Index row, int tokens, int dim) {
  RowMatrix out(tokens, dim);
  for (int t = 0; t < tokens; ++t) {
    for (int d = 0; d < dim; ++d) out(t, d) = x(row, t * dim + d);
  }
  return out;
}

void store_tokens(Matrix& x, Eigen::Index row, const RowMatrix& m) {
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index d = 0; d < m.cols(); ++d) x(row, t * m.cols() + d) = m(t, d);
  }
}

RowMatrix row_softmax(const RowMatrix& s) {
  RowMatrix p = s;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace

Var attention(const Var& x, const Var& wq, const Var& wk, const Var& wv, int tokens,
              int dim) {
  auto& t = same_tape(x, wq);
  same_tape(x, wk);
  same_tape(x, wv);
  if (tokens < 1 || dim < 1 || x.cols() != static_cast<Eigen::Index>(tokens) * dim) {
    throw InvalidArgument("attention: input width must equal tokens * dim");
  }
  for (const auto* w : {&wq, &wk, &wv}) {
    if (w->rows() != dim || w->cols() != dim) {
      throw InvalidArgument("attention: projections must be dim x dim");
    }
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim));
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const RowMatrix xr = tokens_of(x.value(), r, tokens, dim);
    const RowMatrix q = xr * wq.value();
    const RowMatrix k = xr * wk.value();
    const RowMatrix v = xr * wv.value();
    const RowMatrix p = row_softmax(q * k.transpose() * inv_sqrt);
    store_tokens(y, r, p * v);
  }
  return t.record(std::move(y), {x, wq, wk, wv},
                  [x, wq, wk, wv, tokens, dim, inv_sqrt](const Matrix& g, Tape& tp) {
                    Matrix dx = Matrix::Zero(x.rows(), x.cols());
                    Matrix dwq = Matrix::Zero(dim, dim);
                    Matrix dwk = Matrix::Zero(dim, dim);
                    Matrix dwv = Matrix::Zero(dim, dim);
                    for (Eigen::Index r = 0; r < x.rows(); ++r) {
                      const RowMatrix xr = tokens_of(x.value(), r, tokens, dim);
                      const RowMatrix q = xr * wq.value();
                      const RowMatrix k = xr * wk.value();
                      const RowMatrix v = xr * wv.value();
                      const RowMatrix p = row_softmax(q * k.transpose() * inv_sqrt);
                      const RowMatrix go = tokens_of(g, r, tokens, dim);
                      const RowMatrix dp = go * v.transpose();
                      const RowMatrix dv = p.transpose() * go;
                      RowMatrix ds = p.cwiseProduct(dp);
                      const Eigen::VectorXd rowdot = ds.rowwise().sum();
                      ds -= (p.array().colwise() * rowdot.array()).matrix();
                      ds *= inv_sqrt;
                      const RowMatrix dq = ds * k;
                      const RowMatrix dk = ds.transpose() * q;
                      const RowMatrix dxr = dq * wq.value().transpose() +
                                            dk * wk.value().transpose() +
                                            dv * wv.value().transpose();
                      store_tokens(dx, r, dxr);
                      dwq += xr.transpose() * dq;
                      dwk += xr.transpose() * dk;
                      dwv += xr.transpose() * dv;
                    }
                    tp.accumulate(x, dx);
                    tp.accumulate(wq, dwq);
                    tp.accumulate(wk, dwk);
                    tp.accumulate(wv, dwv);
                  });
}

// Distribution heads -----------------------------------------------------------

Matrix masked_softmax(const Matrix& logits, const Matrix& mask) {
  if (mask.rows() != logits.rows() || mask.cols() != logits.cols()) {
    throw InvalidArgument("masked_softmax: mask shape mismatch");
  }
  Matrix p = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (mask(i, j) > 0.5) m = std::max(m, logits(i, j));
    }
    if (!std::isfinite(m)) throw InvalidArgument("masked_softmax: row has no valid entry");
    double z = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      if (mask(i, j) > 0.5) z += (p(i, j) = std::exp(logits(i, j) - m));
    }
    p.row(i) /= z;
  }
  return p;
}

Var categorical_log_prob(const Var& logits, const Matrix& mask,
                         const std::vector<int>& actions) {
  if (static_cast<Eigen::Index>(actions.size()) != logits.rows()) {
    throw InvalidArgument("categorical_log_prob: one action per row required");
  }
  Matrix p = masked_softmax(logits.value(), mask);
  Matrix y(logits.rows(), 1);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int a = actions[static_cast<size_t>(i)];
    if (a < 0 || a >= logits.cols() || mask(i, a) < 0.5) {
      throw InvalidArgument("categorical_log_prob: action outside the valid support");
    }
    y(i, 0) = std::log(p(i, a));
  }
  return logits.tape().record(std::move(y), {logits},
                              [logits, p, actions](const Matrix& g, Tape& tp) {
                                Matrix d = -p;
                                for (Eigen::Index i = 0; i < d.rows(); ++i) {
                                  d(i, actions[static_cast<size_t>(i)]) += 1.0;
                                }
                                d.array().colwise() *= g.col(0).array();
                                tp.accumulate(logits, d);
                              });
}

Var categorical_entropy(const Var& logits, const Matrix& mask) {
  Matrix p = masked_softmax(logits.value(), mask);
  Matrix logp = p.unaryExpr([](double v) { return v > 0.0 ? std::log(v) : 0.0; });
  Matrix h = -(p.cwiseProduct(logp)).rowwise().sum();
  Matrix hc = h;
  return logits.tape().record(std::move(h), {logits},
                              [logits, p, logp, hc](const Matrix& g, Tape& tp) {
                                Matrix d = logp;
                                d.colwise() += hc.col(0);
                                d = -p.cwiseProduct(d);
                                d.array().colwise() *= g.col(0).array();
                                tp.accumulate(logits, d);
                              });
}

Var gaussian_log_prob(const Var& mean, const Var& log_std, const Matrix& z) {
  auto& t = same_tape(mean, log_std);
  check_column(z, mean.rows(), "gaussian_log_prob");
  check_same_shape(mean, log_std, "gaussian_log_prob");
  const Matrix sigma = log_std.value().array().exp().matrix();
  const Matrix u = (z - mean.value()).cwiseQuotient(sigma);
  Matrix y = (-0.5 * u.array().square() - log_std.value().array() - kHalfLog2Pi).matrix();
  return t.record(std::move(y), {mean, log_std},
                  [mean, log_std, sigma, u](const Matrix& g, Tape& tp) {
                    if (tp.requires_grad(mean)) {
                      tp.accumulate(mean, g.cwiseProduct(u.cwiseQuotient(sigma)));
                    }
                    if (tp.requires_grad(log_std)) {
                      tp.accumulate(log_std,
                                    g.cwiseProduct((u.array().square() - 1.0).matrix()));
                    }
                  });
}

Var gaussian_entropy(const Var& log_std) {
  Matrix y = (log_std.value().array() + 0.5 + kHalfLog2Pi).matrix();
  return log_std.tape().record(std::move(y), {log_std},
                               [log_std](const Matrix& g, Tape& tp) { tp.accumulate(log_std, g); });
}

Var log_mixture(const Var& lp, const Matrix& alt, const Matrix& eps) {
  if (alt.rows() != lp.rows() || alt.cols() != lp.cols() || eps.rows() != lp.rows() ||
      eps.cols() != lp.cols()) {
    throw InvalidArgument("log_mixture: shape mismatch");
  }
  Matrix y(lp.rows(), lp.cols());
  Matrix share(lp.rows(), lp.cols());  // d y / d lp
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = eps(i);
    if (!(e >= 0.0 && e < 1.0)) throw InvalidArgument("log_mixture: eps must lie in [0, 1)");
    if (e == 0.0) {
      y(i) = lp.value()(i);
      share(i) = 1.0;
      continue;
    }
    const double a = std::log1p(-e) + lp.value()(i);
    const double b = std::log(e) + alt(i);
    const double m = std::max(a, b);
    y(i) = m + std::log(std::exp(a - m) + std::exp(b - m));
    share(i) = std::exp(a - y(i));
  }
  return lp.tape().record(std::move(y), {lp}, [lp, share](const Matrix& g, Tape& tp) {
    tp.accumulate(lp, g.cwiseProduct(share));
  });
}

Var log_mixture(const Var& lp, const Matrix& alt, double eps) {
  return log_mixture(lp, alt, Matrix::Constant(lp.rows(), lp.cols(), eps));
}

Var clipped_surrogate(const Var& logp_new, const Matrix& logp_old, const Matrix& advantages,
                      const Matrix& weights, double clip_eps) {
  const auto n = logp_new.rows();
  if (logp_new.cols() != 1) throw InvalidArgument("clipped_surrogate: logp must be n x 1");
  check_column(logp_old, n, "clipped_surrogate");
  check_column(advantages, n, "clipped_surrogate");
  check_column(weights, n, "clipped_surrogate");
  const double total = weights.sum();
  if (!(total > 0.0)) throw InvalidArgument("clipped_surrogate: weights sum to zero");
  Matrix slope = Matrix::Zero(n, 1);  // d term / d logp_new
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = std::exp(logp_new.value()(i, 0) - logp_old(i, 0));
    if (!std::isfinite(r)) throw NumericalError("clipped_surrogate: non-finite ratio");
    const double a = advantages(i, 0);
    const double unclipped = r * a;
    const double clipped = std::clamp(r, 1.0 - clip_eps, 1.0 + clip_eps) * a;
    if (unclipped <= clipped) {
      acc += weights(i, 0) * unclipped;
      slope(i, 0) = weights(i, 0) * unclipped / total;
    } else {
      acc += weights(i, 0) * clipped;
    }
  }
  Matrix y(1, 1);
  y(0, 0) = acc / total;
  return logp_new.tape().record(std::move(y), {logp_new},
                                [logp_new, slope](const Matrix& g, Tape& tp) {
                                  tp.accumulate(logp_new, slope * g(0, 0));
                                });
}

}  // namespace usfl::nn
