// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "usfl/env.hpp"
#include "usfl/networks.hpp"
#include "usfl/policy_eval.hpp"
#include "usfl/problem.hpp"

namespace {

std::shared_ptr<const usfl::ModelProfile> profile() {
  static const auto p = std::make_shared<const usfl::ModelProfile>(
      usfl::load_profile(std::string(USFL_BENCH_DATA_DIR) + "/profiles/resnet18_cifar10.json"));
  return p;
}

usfl::EnvConfig env_config() {
  usfl::EnvConfig e;
  e.rho = 0.7 / 0.3;
  e.task_rate = 5.0;
  return e;
}

usfl::nn::Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  usfl::nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
  return m;
}

}  // namespace

static void BM_RoundCost(benchmark::State& state) {
  const auto inst = usfl::make_instance(env_config(), profile(), {}, 1, "bench");
  const auto alloc = usfl::baseline_allocate(inst, {});
  for (auto _ : state) {
    benchmark::DoNotOptimize(usfl::evaluate_allocation(inst, alloc));
  }
}
BENCHMARK(BM_RoundCost);

static void BM_OracleSolve(benchmark::State& state) {
  const auto inst = usfl::make_instance(env_config(), profile(), {}, 2, "bench");
  usfl::OracleOptions opt;
  opt.bw_grid_points = static_cast<int>(state.range(0));
  opt.freq_grid_points = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(usfl::brute_force_solve(inst, opt).objective);
  }
}
BENCHMARK(BM_OracleSolve)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_EnvStep(benchmark::State& state) {
  const usfl::EnvConfig cfg = env_config();
  usfl::VehicularEnv env(cfg, profile());
  usfl::MdpAction a;
  for (int i = 0; i < cfg.vu_count; ++i) {
    a.bandwidth.push_back(cfg.max_bandwidth_per_vu / 2.0);
    a.es_freq.push_back(cfg.max_es_freq_per_vu / 2.0);
    a.splits.push_back(profile()->default_split());
  }
  std::uint64_t seed = 0;
  env.reset(seed);
  for (auto _ : state) {
    if (env.done()) env.reset(++seed);
    benchmark::DoNotOptimize(env.step(a).reward);
  }
}
BENCHMARK(BM_EnvStep);

static void BM_ActorForwardBackward(benchmark::State& state) {
  usfl::nn::Actor actor(usfl::nn::ActorSpec{});
  actor.initialize(3);
  const int batch = static_cast<int>(state.range(0));
  const usfl::nn::Matrix states = random_matrix(batch, 4, 4);
  const usfl::nn::Matrix mask = usfl::nn::Matrix::Ones(batch, 4);
  const std::vector<int> actions(static_cast<size_t>(batch), 1);
  for (auto _ : state) {
    usfl::nn::Tape tape;
    usfl::nn::ActorGraph g = actor.forward(tape, states);
    usfl::nn::Var loss = usfl::nn::mean(usfl::nn::categorical_log_prob(g.x_logits, mask, actions));
    actor.params().zero_grad();
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.scalar());
  }
}
BENCHMARK(BM_ActorForwardBackward)->Arg(1)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

static void BM_ActorEvaluate(benchmark::State& state) {
  usfl::nn::Actor actor(usfl::nn::ActorSpec{});
  actor.initialize(5);
  const Eigen::VectorXd s = random_matrix(4, 1, 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(actor.evaluate(s).cont_bandwidth.mean);
  }
}
BENCHMARK(BM_ActorEvaluate)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
