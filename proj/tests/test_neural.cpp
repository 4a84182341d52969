// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "usfl/error.hpp"
#include "usfl/networks.hpp"
#include "usfl/optimizer.hpp"
#include "usfl/tape.hpp"

using namespace usfl;
using namespace usfl::nn;
using usfl::testing::bundled_profile;
using usfl::testing::max_fd_error;

namespace {

constexpr double kTol = 1e-4;

Matrix gaussian(int rows, int cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

ActorSpec small_actor() {
  ActorSpec s;
  s.trunk.hidden1 = 16;
  s.trunk.hidden2 = 16;
  s.attention_tokens = 4;
  s.attention_dim = 4;
  return s;
}

TrunkSpec small_critic(int vus) {
  TrunkSpec t;
  t.input_dim = 4 * vus;
  t.hidden1 = 16;
  t.hidden2 = 16;
  return t;
}

}  // namespace

TEST_CASE("dense layer gradients") {
  std::mt19937_64 rng(1);
  ParameterSet ps;
  Parameter& w = ps.add("w", gaussian(3, 5, rng));
  Parameter& b = ps.add("b", gaussian(1, 5, rng));
  const Matrix x = gaussian(4, 3, rng);
  const Matrix target = gaussian(4, 5, rng);
  auto loss = [&](bool back) {
    Tape t;
    Var l = mse(linear(t.constant(x), t.param(w), t.param(b)), target);
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(ps, loss) <= kTol);
}

TEST_CASE("LeakyReLU, tanh, exp and elementwise gradients") {
  std::mt19937_64 rng(2);
  ParameterSet ps;
  Matrix init = gaussian(3, 4, rng);
  for (Eigen::Index i = 0; i < init.size(); ++i) {
    if (std::abs(init(i)) < 0.05) init(i) += 0.1;  // keep clear of the kink
  }
  Parameter& a = ps.add("a", init);
  Parameter& c = ps.add("c", gaussian(3, 4, rng));
  auto loss = [&](bool back) {
    Tape t;
    Var x = t.param(a);
    Var y = t.param(c);
    Var h = add(leaky_relu(x, kLeakySlope), mul(tanh(y), exp(scale(x, 0.3))));
    Var l = sum(sub(shift(h, 0.2), scale(y, 0.5)));
    l = add(l, mean(mul(h, h)));
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(ps, loss) <= kTol);
}

TEST_CASE("residual block gradients") {
  std::mt19937_64 rng(3);
  ParameterSet ps;
  Parameter& w1 = ps.add("w1", gaussian(6, 6, rng, 0.5));
  Parameter& b1 = ps.add("b1", gaussian(1, 6, rng, 0.1));
  Parameter& w2 = ps.add("w2", gaussian(6, 6, rng, 0.5));
  Parameter& b2 = ps.add("b2", gaussian(1, 6, rng, 0.1));
  const Matrix x = gaussian(5, 6, rng);
  auto loss = [&](bool back) {
    Tape t;
    Var in = t.constant(x);
    Var h = leaky_relu(linear(in, t.param(w1), t.param(b1)), kLeakySlope);
    Var out = add(in, linear(h, t.param(w2), t.param(b2)));
    Var l = mean(mul(out, out));
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(ps, loss) <= kTol);
}

TEST_CASE("attention gradients") {
  std::mt19937_64 rng(4);
  ParameterSet ps;
  Parameter& x = ps.add("x", gaussian(3, 12, rng));
  Parameter& wq = ps.add("wq", gaussian(4, 4, rng, 0.7));
  Parameter& wk = ps.add("wk", gaussian(4, 4, rng, 0.7));
  Parameter& wv = ps.add("wv", gaussian(4, 4, rng, 0.7));
  const Matrix target = gaussian(3, 12, rng);
  auto loss = [&](bool back) {
    Tape t;
    Var y = attention(t.param(x), t.param(wq), t.param(wk), t.param(wv), 3, 4);
    Var l = mse(y, target);
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(ps, loss) <= kTol);
}

TEST_CASE("softmax head gradients with a mask") {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  Parameter& logits = ps.add("logits", gaussian(4, 4, rng));
  Matrix mask = Matrix::Ones(4, 4);
  mask(0, 1) = 0.0;
  mask(2, 0) = 0.0;
  mask(2, 3) = 0.0;
  const std::vector<int> actions{0, 3, 1, 2};
  auto loss = [&](bool back) {
    Tape t;
    Var z = t.param(logits);
    Var l = add(mean(categorical_log_prob(z, mask, actions)),
                scale(mean(categorical_entropy(z, mask)), 0.7));
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(ps, loss) <= kTol);
}

TEST_CASE("Gaussian head, mixture and clipped surrogate gradients") {
  std::mt19937_64 rng(6);
  ParameterSet ps;
  Parameter& mu = ps.add("mu", gaussian(6, 1, rng));
  Parameter& ls = ps.add("ls", gaussian(6, 1, rng, 0.3));
  const Matrix z = gaussian(6, 1, rng);
  const Matrix alt = Matrix::Constant(6, 1, -1.3);
  const Matrix adv = gaussian(6, 1, rng);
  const Matrix old = Matrix::Constant(6, 1, -1.0);
  auto loss = [&](bool back) {
    Tape t;
    Var lp = gaussian_log_prob(t.param(mu), t.param(ls), z);
    Var mix = log_mixture(lp, alt, 0.1);
    Var l = add(clipped_surrogate(mix, old, adv, Matrix::Ones(6, 1), 100.0),
                scale(mean(gaussian_entropy(t.param(ls))), 0.05));
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(ps, loss) <= kTol);
}

TEST_CASE("small network: finite differences at h = 1e-4") {
  std::mt19937_64 rng(7);
  TrunkSpec spec;
  spec.input_dim = 3;
  spec.hidden1 = 12;
  spec.hidden2 = 12;
  spec.residual_blocks = 1;
  Critic critic(spec);
  critic.initialize(7, 1.0);
  REQUIRE(critic.params().scalar_count() <= 1000);
  const Matrix x = gaussian(8, 3, rng);
  const Matrix y = gaussian(8, 1, rng);
  auto loss = [&](bool back) {
    Tape t;
    Var l = mse(critic.forward(t, x), y);
    if (back) t.backward(l);
    return l.scalar();
  };
  CHECK(max_fd_error(critic.params(), loss) <= kTol);
}

TEST_CASE("full actor and critic gradients") {
  // Seeded so that no LeakyReLU input lies within h of the kink.
  std::mt19937_64 rng(21);
  const int vus = 5;
  Actor actor(small_actor());
  actor.initialize(21, 1.0);
  Critic critic(small_critic(vus));
  critic.initialize(9, 1.0);
  REQUIRE(actor.params().scalar_count() + critic.params().scalar_count() <= 5000);

  const int n = 6;
  const Matrix states = gaussian(n, 4, rng);
  const Matrix global = gaussian(n, 4 * vus, rng);
  const Matrix returns = gaussian(n, 1, rng);
  Matrix xm = Matrix::Ones(n, 4);
  Matrix ym = Matrix::Ones(n, 4);
  ym(0, 0) = 0.0;
  ym(1, 2) = 0.0;
  const std::vector<int> xs{0, 1, 2, 3, 0, 1};
  const std::vector<int> ys{1, 3, 0, 2, 3, 3};
  const Matrix zb = gaussian(n, 1, rng);
  const Matrix zf = gaussian(n, 1, rng);
  const Matrix adv = gaussian(n, 1, rng);
  Matrix old = gaussian(n, 1, rng);
  old.array() -= 4.0;
  const Matrix eps = Matrix::Constant(n, 1, 0.1);
  const Matrix alt = Matrix::Constant(n, 1, -1.2);
  const Matrix w = Matrix::Ones(n, 1);

  auto loss = [&](bool back) {
    Tape t;
    ActorGraph g = actor.forward(t, states);
    Var lp = add(add(log_mixture(categorical_log_prob(g.x_logits, xm, xs), alt, eps),
                     log_mixture(categorical_log_prob(g.y_logits, ym, ys), alt, eps)),
                 add(log_mixture(gaussian_log_prob(g.bw_mean, g.bw_log_std, zb), alt, eps),
                     log_mixture(gaussian_log_prob(g.freq_mean, g.freq_log_std, zf), alt, eps)));
    Var ent = weighted_mean(add(add(categorical_entropy(g.x_logits, xm),
                                    categorical_entropy(g.y_logits, ym)),
                                add(gaussian_entropy(g.bw_log_std),
                                    gaussian_entropy(g.freq_log_std))),
                            w);
    Var actor_loss = scale(add(clipped_surrogate(lp, old, adv, w, 100.0), scale(ent, 0.3)), -1.0);
    Var l = add(actor_loss, mse(critic.forward(t, global), returns));
    if (back) t.backward(l);
    return l.scalar();
  };
  std::string worst;
  const double actor_err = max_fd_error(actor.params(), loss, 1e-4, 1e-6, &worst);
  INFO("worst actor entry " << worst);
  CHECK(actor_err <= kTol);
  CHECK(max_fd_error(critic.params(), loss) <= kTol);
}

TEST_CASE("closed-form gradient of a quadratic") {
  std::mt19937_64 rng(9);
  ParameterSet ps;
  Parameter& w = ps.add("w", gaussian(3, 4, rng));
  const Matrix x = gaussian(4, 1, rng);
  Tape t;
  Var wx = matmul(t.param(w), t.constant(x));
  t.backward(sum(mul(wx, wx)));
  const Matrix expected = 2.0 * (w.value() * x) * x.transpose();
  CHECK((w.grad() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("constant loss leaves zero gradients") {
  std::mt19937_64 rng(10);
  ParameterSet ps;
  Parameter& w = ps.add("w", gaussian(2, 2, rng));
  Tape t;
  t.param(w);
  t.backward(sum(t.constant(Matrix::Ones(2, 2))));
  CHECK(w.grad().isZero());
}

TEST_CASE("backward rejects foreign, stale and non-scalar graphs") {
  Tape a;
  Tape b;
  Var x = a.constant(Matrix::Ones(1, 1));
  CHECK_THROWS_AS(b.backward(x), InvalidArgument);
  CHECK_THROWS_AS(a.backward(a.constant(Matrix::Ones(2, 2))), InvalidArgument);
  a.clear();
  CHECK_THROWS_AS(a.backward(x), InvalidArgument);
  CHECK_THROWS_AS(Var().value(), InvalidArgument);
}

TEST_CASE("log-probabilities match the analytic densities") {
  std::mt19937_64 rng(11);
  Tape t;
  const Matrix logits = gaussian(3, 4, rng);
  const Matrix mask = Matrix::Ones(3, 4);
  const std::vector<int> acts{2, 0, 3};
  const Matrix lp = categorical_log_prob(t.constant(logits), mask, acts).value();
  for (int r = 0; r < 3; ++r) {
    const double norm = logits.row(r).array().exp().sum();
    CHECK(std::abs(lp(r) - (logits(r, acts[r]) - std::log(norm))) < 1e-12);
  }
  const Matrix mu = gaussian(3, 1, rng);
  const Matrix ls = gaussian(3, 1, rng, 0.3);
  const Matrix z = gaussian(3, 1, rng);
  const Matrix g = gaussian_log_prob(t.constant(mu), t.constant(ls), z).value();
  for (int r = 0; r < 3; ++r) {
    const double s = std::exp(ls(r));
    const double d = (z(r) - mu(r)) / s;
    CHECK(std::abs(g(r) - (-0.5 * d * d - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi))) <
          1e-12);
  }
}

TEST_CASE("categorical entropy is bounded by log of the support") {
  Tape t;
  const Matrix uniform = Matrix::Zero(1, 4);
  CHECK(categorical_entropy(t.constant(uniform), Matrix::Ones(1, 4)).scalar() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));
  std::mt19937_64 rng(12);
  for (int k = 0; k < 100; ++k) {
    const double h = categorical_entropy(t.constant(gaussian(1, 4, rng, 3.0)), Matrix::Ones(1, 4))
                         .scalar();
    CHECK(h <= std::log(4.0) + 1e-12);
    CHECK(h >= 0.0);
  }
}

TEST_CASE("actor outputs are valid distributions") {
  const nn::SplitSpace space = nn::SplitSpace::from_profile(*bundled_profile());
  ActorSpec spec = small_actor();
  spec.trunk.hidden1 = 32;
  spec.trunk.hidden2 = 32;
  spec.attention_tokens = 4;
  spec.attention_dim = 8;
  Actor actor(spec);
  std::mt19937_64 rng(13);
  for (std::uint64_t draw = 0; draw < 1000; ++draw) {
    actor.initialize(draw, 1.0);
    const Eigen::VectorXd s = gaussian(4, 1, rng, 2.0);
    const int xi = static_cast<int>(draw % 4);
    const ActorOutput out = actor.evaluate(s, space.x_mask(), space.y_mask(xi));
    CHECK(std::abs(out.discrete_x.sum() - 1.0) < 1e-6);
    CHECK(std::abs(out.discrete_y.sum() - 1.0) < 1e-6);
    CHECK(out.discrete_x.minCoeff() >= 0.0);
    for (int j = 0; j < 4; ++j) {
      if (space.y_mask(xi)(0, j) == 0.0) CHECK(out.discrete_y(j) == 0.0);
    }
    CHECK(out.cont_bandwidth.std > 0.0);
    CHECK(std::log(out.cont_freq.std) >= spec.log_std_min - 1e-12);
    CHECK(std::log(out.cont_freq.std) <= spec.log_std_max + 1e-12);
  }
  // x = 4 admits only y = 9.
  const ActorOutput last = actor.evaluate(Eigen::VectorXd::Zero(4), space.x_mask(), space.y_mask(3));
  CHECK(last.discrete_y(space.index_of_second(9)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zero heads give uniform splits and unit Gaussians") {
  Actor actor(small_actor());
  actor.initialize(1, 0.0);
  const ActorOutput out = actor.evaluate(Eigen::VectorXd::Constant(4, 0.3));
  for (int j = 0; j < 4; ++j) CHECK(out.discrete_x(j) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(out.cont_bandwidth.mean == 0.0);
  CHECK(out.cont_bandwidth.std == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(actor.evaluate(Eigen::VectorXd::Zero(5)), InvalidArgument);
}

TEST_CASE("critic value: zero head, determinism, per-vehicle sensitivity") {
  const int vus = 5;
  Critic zero(small_critic(vus));
  zero.initialize(2, 0.0);
  std::mt19937_64 rng(14);
  const Eigen::VectorXd s = gaussian(4 * vus, 1, rng);
  CHECK(zero.value(s) == 0.0);

  Critic critic(small_critic(vus));
  critic.initialize(3, 1.0);
  const double v = critic.value(s);
  CHECK(critic.value(s) == v);
  for (int i = 0; i < vus; ++i) {
    Eigen::VectorXd t = s;
    t.segment(4 * i, 4).array() += 0.5;
    CHECK(critic.value(t) != v);
  }
  CHECK_THROWS_AS(critic.value(Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST_CASE("Adam reduces a fixed regression loss") {
  Critic critic(small_critic(1));
  critic.initialize(4, 0.01);
  std::mt19937_64 rng(15);
  const Matrix x = gaussian(32, 4, rng);
  Matrix y(32, 1);
  for (int r = 0; r < 32; ++r) y(r) = std::sin(x(r, 0)) + 0.5 * x(r, 1);
  Adam opt(critic.params());
  auto loss = [&] {
    Tape t;
    Var l = mse(critic.forward(t, x), y);
    critic.params().zero_grad();
    t.backward(l);
    return l.scalar();
  };
  const double first = loss();
  double last = first;
  for (int k = 0; k < 100; ++k) {
    last = loss();
    critic.params().clip_grad_norm(1.0);
    opt.step(1e-3);
  }
  CHECK(last < 0.5 * first);
  CHECK(opt.steps() == 100);
}

TEST_CASE("gradient clipping caps the global norm") {
  ParameterSet ps;
  Parameter& a = ps.add("a", Matrix::Zero(2, 2));
  Parameter& b = ps.add("b", Matrix::Zero(1, 3));
  a.grad() = Matrix::Constant(2, 2, 3.0);
  b.grad() = Matrix::Constant(1, 3, 4.0);
  const double before = std::sqrt(4 * 9.0 + 3 * 16.0);
  CHECK(ps.grad_norm() == doctest::Approx(before));
  CHECK(ps.clip_grad_norm(1.0) == doctest::Approx(before));
  CHECK(ps.grad_norm() == doctest::Approx(1.0));
}
