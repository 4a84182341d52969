// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "usfl/error.hpp"

namespace usfl {

void SystemLimits::validate() const {
  if (!(total_bandwidth > 0.0 && total_es_freq > 0.0 && energy_budget > 0.0)) {
    throw InvalidArgument("limits: totals and energy budget must be > 0");
  }
  if (!(weight_rho >= 0.0)) throw InvalidArgument("limits: rho must be >= 0");
}

std::vector<double> ProblemInstance::stay_times() const {
  std::vector<double> out;
  out.reserve(vehicles.size());
  for (const auto& v : vehicles) out.push_back(v.trace.stay_time);
  return out;
}

void ProblemInstance::validate() const {
  if (!profile) throw InvalidArgument("instance " + id + ": no profile");
  if (vehicles.empty()) throw InvalidArgument("instance " + id + ": no vehicles");
  limits.validate();
  for (const auto& v : vehicles) {
    v.trace.validate();
    v.radio.validate();
    v.compute.validate();
  }
}

double evaluate_objective(std::span<const CostBreakdown> costs, double rho) {
  if (costs.empty()) throw InvalidArgument("evaluate_objective: empty cost sequence");
  double energy = 0.0;
  double slowest = 0.0;
  for (const auto& c : costs) {
    energy += c.e_total;
    slowest = std::max(slowest, c.t_total);
  }
  return energy + rho * slowest;
}

std::vector<CostBreakdown> evaluate_allocation(const ProblemInstance& instance,
                                               const Allocation& allocation) {
  const auto n = instance.vehicles.size();
  if (allocation.size() != n || allocation.bandwidth.size() != n ||
      allocation.es_freq.size() != n) {
    throw InvalidArgument("allocation length does not match vehicle count");
  }
  std::vector<CostBreakdown> costs;
  costs.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    auto v = instance.vehicles[i];
    v.radio.uplink_bandwidth = allocation.bandwidth[i];
    v.compute.es_cpu_hz_allocated = allocation.es_freq[i];
    costs.push_back(round_cost(*instance.profile, allocation.splits[i], v.compute, v.radio,
                               v.trace, instance.with_sae, instance.rate_step));
  }
  return costs;
}

std::string FeasibilityReport::describe() const {
  if (feasible()) return "feasible";
  std::ostringstream os;
  for (size_t k = 0; k < violations.size(); ++k) {
    const auto& v = violations[k];
    if (k) os << "; ";
    os << v.constraint;
    if (v.vehicle >= 0) os << "[vu " << v.vehicle << "]";
    os << " exceeded by " << v.margin;
  }
  return os.str();
}

FeasibilityReport check_feasibility(const Allocation& allocation,
                                    std::span<const CostBreakdown> costs,
                                    const SystemLimits& limits,
                                    std::span<const double> stay_times, int total_layers) {
  const auto n = allocation.size();
  if (allocation.bandwidth.size() != n || allocation.es_freq.size() != n ||
      costs.size() != n || stay_times.size() != n) {
    throw InvalidArgument("check_feasibility: inconsistent lengths");
  }
  FeasibilityReport report;
  double bw = 0.0;
  double freq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    bw += allocation.bandwidth[i];
    freq += allocation.es_freq[i];
  }
  if (bw > limits.total_bandwidth) {
    report.violations.push_back({"C1", -1, bw - limits.total_bandwidth});
  }
  if (freq > limits.total_es_freq) {
    report.violations.push_back({"C2", -1, freq - limits.total_es_freq});
  }
  for (size_t i = 0; i < n; ++i) {
    const auto s = allocation.splits[i];
    const int vu = static_cast<int>(i);
    if (s.x < 1) report.violations.push_back({"C3", vu, static_cast<double>(1 - s.x)});
    if (s.x >= s.y) report.violations.push_back({"C3", vu, static_cast<double>(s.x - s.y + 1)});
    if (s.y > total_layers) {
      report.violations.push_back({"C3", vu, static_cast<double>(s.y - total_layers)});
    }
    if (costs[i].t_total > stay_times[i]) {
      report.violations.push_back({"C4", vu, costs[i].t_total - stay_times[i]});
    }
    if (costs[i].e_total > limits.energy_budget) {
      report.violations.push_back({"C5", vu, costs[i].e_total - limits.energy_budget});
    }
  }
  return report;
}

// Oracle ---------------------------------------------------------------------

namespace {

/// All vectors (k_1..k_n), k_i >= 1, sum <= G, in lexicographic order.
std::vector<std::vector<int>> simplex_grid(int n, int G) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<size_t>(n), 1);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n) {
      out.push_back(cur);
      return;
    }
    const int left = n - pos - 1;  // each later entry needs at least 1
    for (int k = 1; k <= remaining - left; ++k) {
      cur[static_cast<size_t>(pos)] = k;
      self(self, pos + 1, remaining - k);
    }
  };
  rec(rec, 0, G);
  return out;
}

struct CellCost {
  double t = 0.0;
  double e = 0.0;
  bool ok = false;  // C4 and C5 hold for this vehicle alone
};

struct Best {
  double objective = std::numeric_limits<double>::infinity();
  std::uint64_t index = std::numeric_limits<std::uint64_t>::max();
};

}  // namespace

OracleResult brute_force_solve(const ProblemInstance& instance, const OracleOptions& options) {
  instance.validate();
  if (options.bw_grid_points < 1 || options.freq_grid_points < 1) {
    throw InvalidArgument("oracle: grid sizes must be >= 1");
  }
  const int n = instance.vu_count();
  const auto& profile = *instance.profile;
  const auto& pairs = profile.allowed_split_pairs();
  const int P = static_cast<int>(pairs.size());
  const int Gb = options.bw_grid_points;
  const int Gf = options.freq_grid_points;
  if (n > Gb || n > Gf) {
    throw InfeasibleError("oracle: grid has fewer points than vehicles");
  }

  const auto bw_vectors = simplex_grid(n, Gb);
  const auto freq_vectors = simplex_grid(n, Gf);
  double split_combos = std::pow(static_cast<double>(P), n);
  const double total = split_combos * static_cast<double>(bw_vectors.size()) *
                       static_cast<double>(freq_vectors.size());
  if (total > static_cast<double>(options.max_evaluations)) {
    throw BudgetExceeded("oracle: " + std::to_string(total) +
                         " grid points exceed the enumeration budget of " +
                         std::to_string(options.max_evaluations));
  }

  // Per-vehicle cost for every (pair, bandwidth level, frequency level).
  // Link rates are linear in bandwidth, so spectral efficiency is integrated
  // once per vehicle.
  const auto cell = [&](int pair, int kb, int kf) {
    return (static_cast<size_t>(pair) * static_cast<size_t>(Gb) + static_cast<size_t>(kb - 1)) *
               static_cast<size_t>(Gf) +
           static_cast<size_t>(kf - 1);
  };
  std::vector<std::vector<CellCost>> table(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& v = instance.vehicles[static_cast<size_t>(i)];
    const double step = instance.rate_step > 0.0 ? instance.rate_step
                                                 : default_rate_step(v.trace);
    const double up_eff = average_spectral_efficiency(v.radio, Direction::uplink, v.trace, step);
    const double down_rate =
        average_rate(v.radio, Direction::downlink, v.radio.downlink_bandwidth, v.trace, step);
    auto& t = table[static_cast<size_t>(i)];
    t.resize(static_cast<size_t>(P * Gb * Gf));
    for (int p = 0; p < P; ++p) {
      for (int kb = 1; kb <= Gb; ++kb) {
        const double bw = instance.limits.total_bandwidth * kb / Gb;
        for (int kf = 1; kf <= Gf; ++kf) {
          auto compute = v.compute;
          compute.es_cpu_hz_allocated = instance.limits.total_es_freq * kf / Gf;
          const auto c = round_cost(profile, pairs[static_cast<size_t>(p)], compute, v.radio,
                                    LinkRates{bw * up_eff, down_rate}, instance.with_sae);
          t[cell(p, kb, kf)] = {c.t_total, c.e_total,
                                c.t_total <= v.trace.stay_time &&
                                    c.e_total <= instance.limits.energy_budget};
        }
      }
    }
  }

  const auto n_combos = static_cast<std::uint64_t>(split_combos);
  const std::uint64_t per_combo =
      static_cast<std::uint64_t>(bw_vectors.size()) * freq_vectors.size();
  const double rho = instance.limits.weight_rho;

  auto search = [&](std::uint64_t combo_begin, std::uint64_t combo_end) {
    Best best;
    std::vector<int> split_idx(static_cast<size_t>(n));
    for (std::uint64_t combo = combo_begin; combo < combo_end; ++combo) {
      // Vehicle 0 is the most significant digit so combos run in lex order.
      std::uint64_t rem = combo;
      for (int i = n - 1; i >= 0; --i) {
        split_idx[static_cast<size_t>(i)] = static_cast<int>(rem % static_cast<std::uint64_t>(P));
        rem /= static_cast<std::uint64_t>(P);
      }
      for (size_t bi = 0; bi < bw_vectors.size(); ++bi) {
        const auto& kb = bw_vectors[bi];
        for (size_t fi = 0; fi < freq_vectors.size(); ++fi) {
          const auto& kf = freq_vectors[fi];
          double energy = 0.0;
          double slowest = 0.0;
          bool ok = true;
          for (int i = 0; i < n && ok; ++i) {
            const auto& c = table[static_cast<size_t>(i)][cell(
                split_idx[static_cast<size_t>(i)], kb[static_cast<size_t>(i)],
                kf[static_cast<size_t>(i)])];
            ok = c.ok;
            energy += c.e;
            slowest = std::max(slowest, c.t);
          }
          if (!ok) continue;
          const double obj = energy + rho * slowest;
          if (obj < best.objective) {
            best.objective = obj;
            best.index = combo * per_combo + bi * freq_vectors.size() + fi;
          }
        }
      }
    }
    return best;
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(options.threads ? options.threads
                                                      : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(std::min<std::uint64_t>(n_combos, 64))));
  std::vector<Best> partial(threads);
  if (threads == 1) {
    partial[0] = search(0, n_combos);
  } else {
    std::vector<std::thread> pool;
    const std::uint64_t chunk = (n_combos + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::uint64_t b = std::min<std::uint64_t>(n_combos, t * chunk);
      const std::uint64_t e = std::min<std::uint64_t>(n_combos, b + chunk);
      pool.emplace_back([&, t, b, e] { partial[t] = search(b, e); });
    }
    for (auto& th : pool) th.join();
  }
  Best best;
  for (const auto& p : partial) {
    if (p.objective < best.objective ||
        (p.objective == best.objective && p.index < best.index)) {
      best = p;
    }
  }
  if (!std::isfinite(best.objective)) {
    throw InfeasibleError("oracle: no feasible point for instance " + instance.id);
  }

  const std::uint64_t combo = best.index / per_combo;
  const std::uint64_t bi = (best.index % per_combo) / freq_vectors.size();
  const std::uint64_t fi = best.index % freq_vectors.size();
  OracleResult result;
  result.evaluated = n_combos * per_combo;
  std::uint64_t rem = combo;
  std::vector<int> split_idx(static_cast<size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    split_idx[static_cast<size_t>(i)] = static_cast<int>(rem % static_cast<std::uint64_t>(P));
    rem /= static_cast<std::uint64_t>(P);
  }
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<size_t>(i);
    result.allocation.splits.push_back(pairs[static_cast<size_t>(split_idx[ui])]);
    result.allocation.bandwidth.push_back(instance.limits.total_bandwidth *
                                          bw_vectors[bi][ui] / Gb);
    result.allocation.es_freq.push_back(instance.limits.total_es_freq *
                                        freq_vectors[fi][ui] / Gf);
  }
  result.costs = evaluate_allocation(instance, result.allocation);
  result.objective = evaluate_objective(result.costs, rho);
  return result;
}

// Baselines --------------------------------------------------------------------

std::string baseline_name(const BaselineSpec& spec) {
  switch (spec.kind) {
    case BaselineKind::equal:
      return "equal";
    case BaselineKind::random:
      return "random(" + std::to_string(spec.seed) + ")";
    case BaselineKind::fixed_split:
      return "fixed_split" + to_string(spec.split);
  }
  return "unknown";
}

Allocation baseline_allocate(const ProblemInstance& instance, const BaselineSpec& spec) {
  instance.validate();
  const auto n = static_cast<size_t>(instance.vu_count());
  const auto& profile = *instance.profile;
  Allocation a;
  const double equal_bw = instance.limits.total_bandwidth / static_cast<double>(n);
  const double equal_f = instance.limits.total_es_freq / static_cast<double>(n);
  switch (spec.kind) {
    case BaselineKind::equal:
      a.bandwidth.assign(n, equal_bw);
      a.es_freq.assign(n, equal_f);
      a.splits.assign(n, profile.default_split());
      break;
    case BaselineKind::fixed_split:
      if (!profile.is_allowed(spec.split)) {
        throw InvalidArgument("fixed_split baseline: pair " + to_string(spec.split) +
                              " is not allowed by profile " + profile.name());
      }
      a.bandwidth.assign(n, equal_bw);
      a.es_freq.assign(n, equal_f);
      a.splits.assign(n, spec.split);
      break;
    case BaselineKind::random: {
      std::mt19937_64 rng(spec.seed);
      // Normalized exponentials with one slack coordinate: uniform on
      // {w >= 0, sum w <= 1}.
      auto simplex = [&](double total) {
        std::exponential_distribution<double> ex(1.0);
        std::vector<double> w(n + 1);
        double s = 0.0;
        for (auto& x : w) s += (x = ex(rng));
        std::vector<double> out(n);
        for (size_t i = 0; i < n; ++i) out[i] = total * w[i] / s;
        return out;
      };
      a.bandwidth = simplex(instance.limits.total_bandwidth);
      a.es_freq = simplex(instance.limits.total_es_freq);
      std::uniform_int_distribution<size_t> pick(0, profile.allowed_split_pairs().size() - 1);
      for (size_t i = 0; i < n; ++i) a.splits.push_back(profile.allowed_split_pairs()[pick(rng)]);
      break;
    }
  }
  return a;
}

std::string format_allocation(const Allocation& allocation) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < allocation.bandwidth.size(); ++i) {
    os << (i ? ";" : "") << allocation.bandwidth[i];
  }
  os << "|";
  for (size_t i = 0; i < allocation.es_freq.size(); ++i) {
    os << (i ? ";" : "") << allocation.es_freq[i];
  }
  os << "|";
  for (size_t i = 0; i < allocation.splits.size(); ++i) {
    os << (i ? ";" : "") << allocation.splits[i].x << "-" << allocation.splits[i].y;
  }
  return os.str();
}

}  // namespace usfl
