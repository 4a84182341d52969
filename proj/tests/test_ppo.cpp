// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "support.hpp"
#include "usfl/checkpoint.hpp"
#include "usfl/env.hpp"
#include "usfl/error.hpp"
#include "usfl/normalizer.hpp"
#include "usfl/optimizer.hpp"
#include "usfl/returns.hpp"
#include "usfl/trainer.hpp"

using namespace usfl;
using usfl::testing::bundled_profile;

namespace {

EnvConfig small_env() {
  EnvConfig e;
  e.vu_count = 2;
  e.task_rate = 3.0;
  e.max_steps = 10;
  e.rho = 0.7 / 0.3;
  e.min_fraction = 0.05;
  return e;
}

TrainConfig small_train() {
  TrainConfig t;
  t.episodes = 6;
  t.buffer_size = 16;
  t.batch_size = 8;
  t.reuse = 2;
  t.hidden1 = 16;
  t.hidden2 = 16;
  t.lr = 1e-3;
  return t;
}

// Direct sum over the remaining trajectory.
std::vector<double> naive_gae(const std::vector<double>& r, const std::vector<double>& v,
                              double gamma, double lam) {
  const size_t n = r.size();
  std::vector<double> delta(n), out(n, 0.0);
  for (size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : 0.0;
    delta[t] = r[t] + gamma * next - v[t];
  }
  for (size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (size_t k = t; k < n; ++k) {
      out[t] += w * delta[k];
      w *= gamma * lam;
    }
  }
  return out;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("usfl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("discounted returns on a hand example") {
  const std::vector<double> r{1.0, 1.0, 1.0};
  const auto g = discounted_returns(r, 0.9);
  REQUIRE(g.size() == 3);
  CHECK(g[0] == doctest::Approx(2.71).epsilon(1e-12));
  CHECK(g[1] == doctest::Approx(1.9).epsilon(1e-12));
  CHECK(g[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(discounted_returns(std::vector<double>{}, 0.9), InvalidArgument);
}

TEST_CASE("GAE matches the direct sum") {
  const std::vector<double> r{1.0, 1.0};
  const std::vector<double> v{0.5, 0.5};
  const auto a = gae_advantages(r, v, 1.0, 0.5);
  CHECK(a[0] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto zero_values =
      gae_advantages(r, std::vector<double>{0.0, 0.0}, 0.5, 0.5);
  CHECK(zero_values[0] == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(zero_values[1] == doctest::Approx(1.0).epsilon(1e-12));

  // lambda = 0 reduces to the one-step TD error.
  const auto td = gae_advantages(r, v, 0.9, 0.0);
  CHECK(td[0] == doctest::Approx(1.0 + 0.9 * 0.5 - 0.5).epsilon(1e-12));
  CHECK(td[1] == doctest::Approx(0.5).epsilon(1e-12));

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> rr(40), vv(40);
  for (size_t i = 0; i < 40; ++i) {
    rr[i] = n(rng);
    vv[i] = n(rng);
  }
  const auto fast = gae_advantages(rr, vv, 0.99, 0.95);
  const auto slow = naive_gae(rr, vv, 0.99, 0.95);
  for (size_t i = 0; i < 40; ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-10);

  // lambda = 1 with zero values gives the discounted return.
  const auto mc = gae_advantages(rr, std::vector<double>(40, 0.0), 0.99, 1.0);
  const auto g = discounted_returns(rr, 0.99);
  for (size_t i = 0; i < 40; ++i) CHECK(std::abs(mc[i] - g[i]) < 1e-10);
}

TEST_CASE("advantage normalization gives zero mean and unit std") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(3.0, 7.0);
  std::vector<double> a(1000);
  for (double& x : a) x = n(rng);
  normalize_advantages(a);
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= a.size();
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / a.size());
  CHECK(std::abs(mean) < 1e-8);
  CHECK(std::abs(sd - 1.0) < 1e-6);

  std::vector<double> constant(5, 2.0);
  normalize_advantages(constant);
  for (double x : constant) CHECK(std::isfinite(x));
}

TEST_CASE("clipped surrogate terms and losses") {
  CHECK(clipped_term(1.5, 1.0, 0.1) == doctest::Approx(1.1));
  CHECK(clipped_term(0.5, -1.0, 0.1) == doctest::Approx(-0.9));
  CHECK(clipped_term(1.05, 2.0, 0.1) == doctest::Approx(2.1));
  CHECK(clipped_term(0.5, 1.0, 0.1) == doctest::Approx(0.5));

  // Identical policies: ratio 1, loss -(mean A + c H).
  const std::vector<double> lp{-1.0, -2.0, -0.5};
  const std::vector<double> adv{1.0, -2.0, 4.0};
  CHECK(clipped_actor_loss(lp, lp, adv, 0.1, 0.7, 0.01) ==
        doctest::Approx(-(1.0 + 0.007)).epsilon(1e-12));

  const std::vector<double> values{1.0, 2.0};
  const std::vector<double> returns{3.0, 0.0};
  CHECK(critic_loss(values, returns) == doctest::Approx(4.0));
  CHECK(critic_loss(values, std::vector<double>{0.0, 0.0}) == doctest::Approx(2.5));
}

TEST_CASE("running normalizer recovers N(5, 4)") {
  RunningNormalizer norm(1);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(5.0, 2.0);
  for (int i = 0; i < 100000; ++i) norm.update(Eigen::VectorXd::Constant(1, n(rng)));
  CHECK(norm.count() == 100000);
  CHECK(std::abs(norm.mean()(0) - 5.0) < 0.05);
  CHECK(std::abs(norm.stddev()(0) - 2.0) < 0.05);
  const double z = norm.normalize(Eigen::VectorXd::Constant(1, 7.0))(0);
  CHECK(std::abs(z - 1.0) < 0.05);

  RunningNormalizer fresh(2, 1e-3);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 4.0);
  fresh.update(x);
  CHECK(fresh.normalize(x).isZero());
  CHECK_THROWS_AS(fresh.update(Eigen::VectorXd::Zero(3)), InvalidArgument);
}

TEST_CASE("updates per flush follow reuse and batch counts") {
  TrainConfig t;
  t.buffer_size = 1024;
  t.batch_size = 256;
  t.reuse = 5;
  CHECK(t.updates_per_flush() == 20);
  CHECK(t.epsilon_at(0) == doctest::Approx(t.epsilon_start));
  CHECK(t.epsilon_at(t.episodes - 1) == doctest::Approx(t.epsilon_end));
  CHECK(t.epsilon_at(t.episodes / 2) < t.epsilon_start);
  t.batch_size = 2048;
  CHECK_THROWS(t.validate());
}

TEST_CASE("critic loss falls over 100 updates on rollout returns") {
  const EnvConfig cfg = small_env();
  VehicularEnv env(cfg, bundled_profile());
  const auto& profile = *bundled_profile();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::vector<std::vector<double>> states;
  std::vector<double> targets;
  for (std::uint64_t ep = 0; ep < 8; ++ep) {
    env.reset(ep);
    std::vector<double> rewards;
    while (!env.done()) {
      states.push_back(env.state().global_features());
      MdpAction a;
      for (int i = 0; i < cfg.vu_count; ++i) {
        a.bandwidth.push_back(u(rng) * cfg.max_bandwidth_per_vu / cfg.vu_count);
        a.es_freq.push_back(u(rng) * cfg.max_es_freq_per_vu / cfg.vu_count);
        a.splits.push_back(profile.default_split());
      }
      rewards.push_back(env.step(project_action(a, cfg, profile)).reward);
    }
    for (double g : discounted_returns(rewards, 0.99)) targets.push_back(g);
  }
  REQUIRE(states.size() == targets.size());
  const int n = static_cast<int>(states.size());
  const int dim = static_cast<int>(states[0].size());

  RunningNormalizer norm(dim);
  for (const auto& s : states) norm.update(Eigen::Map<const Eigen::VectorXd>(s.data(), dim));
  nn::Matrix x(n, dim);
  nn::Matrix y(n, 1);
  double target_scale = 0.0;
  for (double g : targets) target_scale = std::max(target_scale, std::abs(g));
  for (int r = 0; r < n; ++r) {
    x.row(r) = norm.normalize(Eigen::Map<const Eigen::VectorXd>(states[r].data(), dim));
    y(r) = targets[r] / target_scale;
  }

  nn::TrunkSpec spec;
  spec.input_dim = dim;
  spec.hidden1 = 32;
  spec.hidden2 = 32;
  nn::Critic critic(spec);
  critic.initialize(6);
  nn::Adam opt(critic.params());
  std::vector<double> losses;
  for (int k = 0; k < 100; ++k) {
    nn::Tape t;
    nn::Var l = nn::mse(critic.forward(t, x), y);
    critic.params().zero_grad();
    t.backward(l);
    losses.push_back(l.scalar());
    critic.params().clip_grad_norm(1.0);
    opt.step(1e-3);
  }
  CHECK(losses.back() < 0.5 * losses.front());
}

TEST_CASE("restore_parameters names the first mismatched array") {
  nn::ParameterSet src;
  src.add("a", nn::Matrix::Ones(2, 2));
  src.add("b", nn::Matrix::Ones(1, 3));
  src.add("c", nn::Matrix::Ones(3, 1));
  CheckpointData data;
  append_parameters(data, "net", src);
  data.arrays[1].value = nn::Matrix::Zero(1, 4);
  data.arrays[2].value = nn::Matrix::Zero(2, 1);

  nn::ParameterSet dst;
  dst.add("a", nn::Matrix::Zero(2, 2));
  dst.add("b", nn::Matrix::Zero(1, 3));
  dst.add("c", nn::Matrix::Zero(3, 1));
  try {
    restore_parameters(data, "net", dst);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("net/b") != std::string::npos);
    CHECK(msg.find("net/c") == std::string::npos);
  }
  CHECK_THROWS_AS(restore_parameters(data, "other", dst), CheckpointError);
}

TEST_CASE("checkpoint file: round trip and truncation") {
  const auto dir = scratch_dir("checkpoint");
  CheckpointData data;
  data.metadata["kind"] = "test";
  data.arrays.push_back({"w", nn::Matrix::Random(5, 7)});
  data.arrays.push_back({"b", nn::Matrix::Constant(1, 3, 1.0 / 3.0)});
  const auto path = dir / "ckpt.json";
  write_checkpoint(path, data);
  const CheckpointData back = read_checkpoint(path);
  CHECK(back.metadata == data.metadata);
  REQUIRE(back.arrays.size() == 2);
  CHECK(back.find("w")->value == data.arrays[0].value);
  CHECK(back.find("b")->value == data.arrays[1].value);

  const std::string text = checkpoint_to_string(data);
  {
    std::ofstream out(path, std::ios::trunc);
    out << text.substr(0, text.size() / 2);
  }
  try {
    read_checkpoint(path);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("corrupt") != std::string::npos);
  }
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.json"), CheckpointError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("trained policy survives a checkpoint round trip on 100 states") {
  Trainer trainer(small_env(), small_train(), bundled_profile(), 11);
  trainer.train();
  CHECK(trainer.flushes() > 0);
  CHECK(trainer.updates() == trainer.flushes() * small_train().updates_per_flush());

  MultiAgentPolicy& policy = trainer.policy();
  const CheckpointData saved = checkpoint_from_string(checkpoint_to_string(policy.to_checkpoint()));
  MultiAgentPolicy loaded = MultiAgentPolicy::from_checkpoint(saved, *bundled_profile());
  CHECK(loaded.actor_count() == policy.actor_count());

  const EnvConfig cfg = small_env();
  VehicularEnv env(cfg, bundled_profile());
  for (std::uint64_t s = 0; s < 100; ++s) {
    const MdpState state = env.reset(1000 + s);
    CHECK(loaded.greedy_action(state, cfg, *bundled_profile()) ==
          policy.greedy_action(state, cfg, *bundled_profile()));
    const nn::Matrix in = policy.local_inputs(state);
    CHECK(loaded.local_inputs(state) == in);
    const Eigen::VectorXd row = in.row(0).transpose();
    const nn::ActorOutput a = policy.actor_for(0).evaluate(row);
    const nn::ActorOutput b = loaded.actor_for(0).evaluate(row);
    CHECK(a.discrete_x == b.discrete_x);
    CHECK(a.cont_bandwidth.mean == b.cont_bandwidth.mean);
  }

  CheckpointData broken = saved;
  bool found = false;
  for (NamedArray& a : broken.arrays) {
    if (a.name.find("head.x.w") != std::string::npos) {
      a.value = nn::Matrix::Zero(a.value.rows() + 1, a.value.cols());
      const std::string name = a.name;
      found = true;
      try {
        loaded.restore(broken);
        FAIL("expected CheckpointError");
      } catch (const CheckpointError& e) {
        CHECK(std::string(e.what()).find(name) != std::string::npos);
      }
      break;
    }
  }
  CHECK(found);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto run = [](std::uint64_t seed) {
    Trainer trainer(small_env(), small_train(), bundled_profile(), seed);
    std::ostringstream os;
    write_metrics_header(os);
    for (const EpisodeMetrics& m : trainer.train()) write_metrics_row(os, m);
    return std::make_pair(os.str(), checkpoint_to_string(trainer.to_checkpoint()));
  };
  const auto a = run(3);
  const auto b = run(3);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(run(4).first != a.first);
}

TEST_CASE("mixture and logistic densities") {
  CHECK(mixture_log_prob(std::log(0.2), std::log(0.5), 0.1) ==
        doctest::Approx(std::log(0.9 * 0.2 + 0.1 * 0.5)));
  CHECK(mixture_log_prob(-1000.0, std::log(0.5), 0.1) == doctest::Approx(std::log(0.05)));
  CHECK(log_logistic_density(0.0) == doctest::Approx(std::log(0.25)));
  CHECK(log_logistic_density(3.0) == doctest::Approx(log_logistic_density(-3.0)));
}
