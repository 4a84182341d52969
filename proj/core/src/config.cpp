// Copyright 2026 The usfl Authors
// SPDX-License-Identifier: Apache-2.0

#include "usfl/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <utility>

#include <toml.hpp>

#include "usfl/error.hpp"

namespace usfl {
namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<StepMode> kStepModes[] = {{StepMode::realized_max, "realized_max"},
                                             {StepMode::fixed, "fixed"}};
constexpr EnumName<CriticTarget> kCriticTargets[] = {
    {CriticTarget::monte_carlo, "monte_carlo"}, {CriticTarget::gae, "gae"}};
constexpr EnumName<GainModel> kGainModels[] = {{GainModel::log_distance, "log_distance"},
                                               {GainModel::power_law, "power_law"}};

template <typename E, size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  return "?";
}

template <typename E, size_t N>
std::string enum_choices(const EnumName<E> (&table)[N]) {
  std::string out;
  for (const auto& entry : table) {
    if (!out.empty()) out += ", ";
    out += entry.name;
  }
  return out;
}

// Every configurable key. Reading and writing both walk this list.
template <typename V, typename C>
void bind_all(V& v, C& c) {
  v("run.seed", c.seed);
  v("run.out_dir", c.out_dir);
  v("profile.path", c.profile_path);

  auto& e = c.env;
  v("env.vu_count", e.vu_count);
  v("env.task_rate", e.task_rate);
  v("env.max_steps", e.max_steps);
  v("env.distance_min", e.distance_min);
  v("env.distance_max", e.distance_max);
  v("env.max_bandwidth_per_vu", e.max_bandwidth_per_vu);
  v("env.max_es_freq_per_vu", e.max_es_freq_per_vu);
  v("env.total_bandwidth", e.total_bandwidth);
  v("env.total_es_freq", e.total_es_freq);
  v("env.energy_budget", e.energy_budget);
  v("env.rho", e.rho);
  v("env.step_mode", e.step_mode, kStepModes);
  v("env.step_duration", e.step_duration);
  v("env.min_fraction", e.min_fraction);
  v("env.with_sae", e.with_sae);
  v("env.es_height", e.es_height);
  v("env.coverage_diameter", e.coverage_diameter);
  v("env.speed", e.speed);

  auto& cp = e.compute;
  v("compute.vu_cpu_hz", cp.vu_cpu_hz);
  v("compute.vu_flops_per_cycle", cp.vu_flops_per_cycle);
  v("compute.es_flops_per_cycle", cp.es_flops_per_cycle);
  v("compute.power_coeff", cp.power_coeff);
  v("compute.batch_size", cp.batch_size);

  auto& r = e.radio;
  v("radio.downlink_bandwidth", r.downlink_bandwidth);
  v("radio.tx_power_vu", r.tx_power_vu);
  v("radio.tx_power_es", r.tx_power_es);
  v("radio.rx_power_vu", r.rx_power_vu);
  v("radio.noise_power", r.noise_power);
  v("radio.carrier_hz", r.carrier_hz);
  v("radio.gain_model", r.gain_model, kGainModels);
  v("radio.unit_gain", r.unit_gain);
  v("radio.pathloss_exponent", r.pathloss_exponent);

  auto& t = c.train;
  v("train.gamma", t.gamma);
  v("train.gae_lambda", t.gae_lambda);
  v("train.clip_eps", t.clip_eps);
  v("train.entropy_coeff", t.entropy_coeff);
  v("train.lr", t.lr);
  v("train.lr_decay", t.lr_decay);
  v("train.episodes", t.episodes);
  v("train.buffer_size", t.buffer_size);
  v("train.batch_size", t.batch_size);
  v("train.reuse", t.reuse);
  v("train.grad_clip_norm", t.grad_clip_norm);
  v("train.epsilon_start", t.epsilon_start);
  v("train.epsilon_end", t.epsilon_end);
  v("train.normalize_advantages", t.normalize_advantages);
  v("train.scale_rewards", t.scale_rewards);
  v("train.critic_target", t.critic_target, kCriticTargets);
  v("train.shared_actor", t.shared_actor);
  v("train.checkpoint_every", t.checkpoint_every);
  v("train.hidden1", t.hidden1);
  v("train.hidden2", t.hidden2);
  v("train.residual_blocks", t.residual_blocks);
  v("train.head_init_scale", t.head_init_scale);

  auto& o = c.oracle;
  v("oracle.instances", o.instances);
  v("oracle.vu_count", o.instance.vu_count);
  v("oracle.position_min", o.instance.position_min);
  v("oracle.position_max", o.instance.position_max);
  v("oracle.energy_budget", o.instance.energy_budget);
  v("oracle.tasks", o.instance.tasks);
  v("oracle.bw_grid_points", o.options.bw_grid_points);
  v("oracle.freq_grid_points", o.options.freq_grid_points);
  v("oracle.max_evaluations", o.options.max_evaluations);
  v("oracle.threads", o.options.threads);
  v("oracle.random_baseline_draws", o.random_baseline_draws);

  auto& s = c.sweep;
  v("sweep.vehicle_counts", s.vehicle_counts);
  v("sweep.total_bandwidth", s.total_bandwidth);
  v("sweep.total_es_freq", s.total_es_freq);
  v("sweep.latency_weight", s.latency_weight);
  v("sweep.energy_weight", s.energy_weight);
  v("sweep.position_min", s.position_min);
  v("sweep.position_max", s.position_max);

  v("eval.checkpoint", c.eval.checkpoint);
  v("eval.episodes", c.eval.episodes);
  v("eval.oracle_gap", c.eval.oracle_gap);
}

std::string where(const toml::node& node) {
  const auto& src = node.source();
  if (src.begin.line == 0) return "";
  return " (line " + std::to_string(src.begin.line) + ")";
}

[[noreturn]] void type_error(std::string_view key, const toml::node& node, const char* want) {
  throw ConfigError("config: " + std::string(key) + " must be " + want + where(node));
}

class Reader {
 public:
  explicit Reader(const toml::table& root) : root_(root) {}

  void operator()(std::string_view key, double& out) {
    if (const toml::node* n = find(key)) {
      if (auto f = n->as_floating_point()) {
        out = f->get();
      } else if (auto i = n->as_integer()) {
        out = static_cast<double>(i->get());
      } else {
        type_error(key, *n, "a number");
      }
    }
  }

  void operator()(std::string_view key, int& out) {
    if (const toml::node* n = find(key)) {
      const std::int64_t v = integer(key, *n);
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        type_error(key, *n, "a 32-bit integer");
      }
      out = static_cast<int>(v);
    }
  }

  void operator()(std::string_view key, unsigned& out) {
    if (const toml::node* n = find(key)) {
      const std::int64_t v = integer(key, *n);
      if (v < 0 || v > std::numeric_limits<unsigned>::max()) {
        type_error(key, *n, "a non-negative integer");
      }
      out = static_cast<unsigned>(v);
    }
  }

  void operator()(std::string_view key, std::uint64_t& out) {
    if (const toml::node* n = find(key)) {
      const std::int64_t v = integer(key, *n);
      if (v < 0) type_error(key, *n, "a non-negative integer");
      out = static_cast<std::uint64_t>(v);
    }
  }

  void operator()(std::string_view key, bool& out) {
    if (const toml::node* n = find(key)) {
      auto b = n->as_boolean();
      if (!b) type_error(key, *n, "a boolean");
      out = b->get();
    }
  }

  void operator()(std::string_view key, std::string& out) {
    if (const toml::node* n = find(key)) out = string(key, *n);
  }

  void operator()(std::string_view key, std::filesystem::path& out) {
    if (const toml::node* n = find(key)) out = string(key, *n);
  }

  void operator()(std::string_view key, std::vector<int>& out) {
    if (const toml::node* n = find(key)) {
      auto arr = n->as_array();
      if (!arr) type_error(key, *n, "an array of integers");
      std::vector<int> values;
      for (const toml::node& item : *arr) {
        auto i = item.as_integer();
        if (!i) type_error(key, item, "an array of integers");
        values.push_back(static_cast<int>(i->get()));
      }
      out = std::move(values);
    }
  }

  template <typename E, size_t N>
  void operator()(std::string_view key, E& out, const EnumName<E> (&table)[N]) {
    if (const toml::node* n = find(key)) {
      const std::string s = string(key, *n);
      for (const auto& entry : table) {
        if (s == entry.name) {
          out = entry.value;
          return;
        }
      }
      throw ConfigError("config: " + std::string(key) + " = \"" + s + "\" is not one of " +
                        enum_choices(table) + where(*n));
    }
  }

  void reject_unknown() const { walk(root_, ""); }

 private:
  const toml::node* find(std::string_view key) {
    known_.insert(std::string(key));
    return root_.at_path(key).node();
  }

  static std::int64_t integer(std::string_view key, const toml::node& n) {
    auto i = n.as_integer();
    if (!i) type_error(key, n, "an integer");
    return i->get();
  }

  static std::string string(std::string_view key, const toml::node& n) {
    auto s = n.as_string();
    if (!s) type_error(key, n, "a string");
    return s->get();
  }

  void walk(const toml::table& table, const std::string& prefix) const {
    for (const auto& [k, node] : table) {
      const std::string key = prefix.empty() ? std::string(k.str())
                                             : prefix + "." + std::string(k.str());
      if (const toml::table* sub = node.as_table()) {
        walk(*sub, key);
      } else if (!known_.contains(key)) {
        throw ConfigError("config: unknown key '" + key + "'" + where(node));
      }
    }
  }

  const toml::table& root_;
  std::set<std::string, std::less<>> known_;
};

class Writer {
 public:
  void operator()(std::string_view key, double v) { put(key, v); }
  void operator()(std::string_view key, int v) { put(key, static_cast<std::int64_t>(v)); }
  void operator()(std::string_view key, unsigned v) { put(key, static_cast<std::int64_t>(v)); }
  void operator()(std::string_view key, std::uint64_t v) {
    put(key, static_cast<std::int64_t>(v));
  }
  void operator()(std::string_view key, bool v) { put(key, v); }
  void operator()(std::string_view key, const std::string& v) { put(key, v); }
  void operator()(std::string_view key, const std::filesystem::path& v) {
    put(key, v.generic_string());
  }
  void operator()(std::string_view key, const std::vector<int>& v) {
    toml::array arr;
    for (int x : v) arr.push_back(static_cast<std::int64_t>(x));
    put(key, std::move(arr));
  }
  template <typename E, size_t N>
  void operator()(std::string_view key, E v, const EnumName<E> (&table)[N]) {
    put(key, std::string(enum_name(table, v)));
  }

  const toml::table& table() const { return root_; }

 private:
  template <typename T>
  void put(std::string_view key, T&& value) {
    const size_t dot = key.find('.');
    const std::string section(key.substr(0, dot));
    auto* sub = root_.get_as<toml::table>(section);
    if (sub == nullptr) {
      root_.insert(section, toml::table{});
      sub = root_.get_as<toml::table>(section);
    }
    sub->insert_or_assign(std::string(key.substr(dot + 1)), std::forward<T>(value));
  }

  toml::table root_;
};

void apply_override(toml::table& root, std::string_view assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("config: override '" + std::string(assignment) +
                      "' is not of the form dotted.key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  // TOML literals parse as typed values; anything else is a bare string.
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + raw);
  } catch (const toml::parse_error&) {
    parsed = toml::table{};
    parsed.insert("v", raw);
  }

  toml::table* cur = &root;
  std::string_view rest = key;
  for (size_t dot = rest.find('.'); dot != std::string_view::npos; dot = rest.find('.')) {
    const std::string part(rest.substr(0, dot));
    toml::node* child = cur->get(part);
    if (child == nullptr) {
      cur->insert(part, toml::table{});
      child = cur->get(part);
    }
    cur = child->as_table();
    if (cur == nullptr) {
      throw ConfigError("config: override '" + key + "': '" + part + "' is not a table");
    }
    rest.remove_prefix(dot + 1);
  }
  cur->insert_or_assign(std::string(rest), std::move(*parsed.get("v")));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (profile_path.empty()) throw ConfigError("config: profile.path is required");
  if (env.rho <= 0.0) throw ConfigError("config: env.rho is required and must be positive");
  try {
    env.validate();
    train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (oracle.instances < 1) throw ConfigError("config: oracle.instances must be >= 1");
  if (oracle.instance.vu_count < 1) throw ConfigError("config: oracle.vu_count must be >= 1");
  if (oracle.instance.position_max < oracle.instance.position_min) {
    throw ConfigError("config: oracle.position_max must be >= oracle.position_min");
  }
  if (oracle.instance.energy_budget <= 0.0) {
    throw ConfigError("config: oracle.energy_budget must be positive");
  }
  if (oracle.options.bw_grid_points < 1 || oracle.options.freq_grid_points < 1) {
    throw ConfigError("config: oracle grid points must be >= 1");
  }
  if (oracle.random_baseline_draws < 0) {
    throw ConfigError("config: oracle.random_baseline_draws must be >= 0");
  }
  if (sweep.vehicle_counts.empty()) throw ConfigError("config: sweep.vehicle_counts is empty");
  for (int n : sweep.vehicle_counts) {
    if (n < 1) throw ConfigError("config: sweep.vehicle_counts entries must be >= 1");
  }
  if (sweep.total_bandwidth <= 0.0 || sweep.total_es_freq <= 0.0) {
    throw ConfigError("config: sweep totals must be positive");
  }
  if (sweep.latency_weight < 0.0 || sweep.energy_weight <= 0.0) {
    throw ConfigError("config: sweep weights must be non-negative, energy_weight positive");
  }
  if (eval.episodes < 1) throw ConfigError("config: eval.episodes must be >= 1");
}

ExperimentConfig parse_config(std::string_view toml_text, const std::vector<std::string>& overrides,
                              const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  for (const std::string& o : overrides) apply_override(root, o);

  ExperimentConfig config;
  Reader reader(root);
  bind_all(reader, config);
  reader.reject_unknown();

  if (!config.profile_path.empty() && config.profile_path.is_relative() && !base_dir.empty()) {
    config.profile_path = (base_dir / config.profile_path).lexically_normal();
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides, path.parent_path());
}

std::string config_to_toml(const ExperimentConfig& config) {
  Writer writer;
  bind_all(writer, config);
  std::ostringstream out;
  out << writer.table() << "\n";
  return out.str();
}

}  // namespace usfl
