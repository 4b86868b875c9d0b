#include "decadmm/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace decadmm {

namespace {

bool is_admm(const std::string& a) { return a == "asi-admm" || a == "si-admm" || a == "i-admm"; }

bool is_known(const std::string& a) {
  const auto& names = known_algorithms();
  return std::find(names.begin(), names.end(), a) != names.end();
}

// Shortest decimal that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError(field + ": " + what);
}

double require(const std::optional<double>& v, const std::string& field) {
  if (!v) fail(field, "missing (required by the selected algorithm)");
  return *v;
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& prefix = "") {
  const YAML::Node child = node[key];
  if (!child) return;
  try {
    out = child.as<T>();
  } catch (const YAML::Exception&) {
    fail(prefix + key, "cannot parse '" + YAML::Dump(child) + "'");
  }
}

template <typename T>
void read_opt(const YAML::Node& node, const char* key, std::optional<T>& out,
              const std::string& prefix = "") {
  const YAML::Node child = node[key];
  if (!child) return;
  if (child.IsNull()) {
    out.reset();
    return;
  }
  T v{};
  read(node, key, v, prefix);
  out = v;
}

ExperimentConfig regression_base(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.n_agents = 20;
  c.omega = 0.3;
  c.batch_ratio = 0.1;
  c.iterations = 3000;
  c.stride = 10;
  return c;
}

ExperimentConfig localization_base(int n, double omega) {
  ExperimentConfig c;
  c.kind = ExperimentKind::kLocalization;
  c.algorithms = {"asi-admm", "igd", "dgd"};
  c.n_agents = n;
  c.omega = omega;
  c.batch_size = 10;
  c.iterations = 400;
  c.stride = 10;
  c.localization.n_agents = n;
  c.params["asi-admm"] = {.rho = 1.0, .tau = 10.0, .gamma = 1.0, .eta_bar = 0.8, .iota_sq = 10.0};
  c.rl.loss_scale = 0.002;
  return c;
}

ExperimentConfig resource_base(int n) {
  ExperimentConfig c;
  c.kind = ExperimentKind::kResource;
  c.algorithms = {"asi-admm", "igd", "dgd"};
  c.n_agents = n;
  c.omega = 0.3;
  c.batch_size = 10;
  c.iterations = 2000;
  c.stride = 20;
  c.params["asi-admm"] = {.rho = 1.0, .tau = 20.0, .gamma = 1.0, .eta_bar = 0.8, .iota_sq = 10.0};
  c.params["igd"] = {.step = 0.0095};
  c.params["dgd"] = {.step = 0.0095};
  c.rl.loss_scale = 1.0;
  return c;
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kRidge:
      return "ridge";
    case ExperimentKind::kLogistic:
      return "logistic";
    case ExperimentKind::kLocalization:
      return "localization";
    case ExperimentKind::kResource:
      return "resource";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "ridge") return ExperimentKind::kRidge;
  if (s == "logistic") return ExperimentKind::kLogistic;
  if (s == "localization") return ExperimentKind::kLocalization;
  if (s == "resource") return ExperimentKind::kResource;
  fail("kind", "unknown experiment kind '" + s + "'");
}

bool is_rl(ExperimentKind k) {
  return k == ExperimentKind::kLocalization || k == ExperimentKind::kResource;
}

void ExperimentConfig::validate() const {
  if (algorithms.empty()) fail("algorithms", "at least one algorithm is required");
  for (const auto& a : algorithms) {
    if (!is_known(a)) fail("algorithms", "unknown algorithm '" + a + "'");
    if (is_rl(kind) && a == "i-admm") {
      fail("algorithms", "i-admm needs exact local gradients, which RL objectives lack");
    }
  }
  if (n_agents < 2) fail("n_agents", "must be >= 2");
  if (!(omega > 0 && omega <= 1)) fail("omega", "must lie in (0, 1]");
  if (iterations < 0) fail("iterations", "must be >= 0");
  if (seeds.empty()) fail("seeds", "at least one seed is required");
  if (stride < 1) fail("stride", "must be >= 1");
  if (jobs < 1) fail("jobs", "must be >= 1");
  if (batch_ratio && batch_size) fail("batch", "ratio and size are mutually exclusive");
  if (!batch_ratio && !batch_size) fail("batch", "one of ratio or size is required");
  if (batch_ratio && !(*batch_ratio > 0 && *batch_ratio <= 1)) fail("batch.ratio", "must lie in (0, 1]");
  if (batch_size && *batch_size < 1) fail("batch.size", "must be >= 1");
  if (batch_ratio && is_rl(kind)) fail("batch.ratio", "RL experiments have no local dataset; use size");

  for (const auto& a : algorithms) {
    if (is_admm(a)) {
      HyperParams hp = admm_params(a, 1);
      try {
        hp.validate();
      } catch (const InvalidArgument& e) {
        throw ConfigError(a + "." + e.what());
      }
    } else {
      const double step = baseline_step(a);
      if (!(step > 0)) fail(a + ".step", "must be > 0");
    }
  }

  if (is_rl(kind)) {
    if (!(rl.loss_scale > 0)) fail("rl.loss_scale", "must be > 0");
    if (rl.eval_episodes < 1) fail("rl.eval_episodes", "must be >= 1");
    if (rl.reward_window < 1) fail("rl.reward_window", "must be >= 1");
    if (rl.trace_intervals < 1) fail("rl.trace_intervals", "must be >= 1");
    try {
      if (kind == ExperimentKind::kLocalization) {
        LocalizationConfig lc = localization;
        lc.n_agents = n_agents;
        lc.validate();
      } else {
        resource.validate();
      }
    } catch (const InvalidArgument& e) {
      throw ConfigError(to_string(kind) + "." + e.what());
    }
  } else {
    if (regression.samples_per_agent < 1) fail("regression.samples_per_agent", "must be >= 1");
    if (regression.dim < 1) fail("regression.dim", "must be >= 1");
    if (!(regression.noise_sigma >= 0)) fail("regression.noise_sigma", "must be >= 0");
    if (!(regression.feature_scale > 0)) fail("regression.feature_scale", "must be > 0");
    if (!(regression.l2 >= 0)) fail("regression.l2", "must be >= 0");
  }
}

int ExperimentConfig::resolved_batch(std::optional<int> local_size) const {
  if (batch_size) return *batch_size;
  if (!batch_ratio) fail("batch", "one of ratio or size is required");
  if (!local_size) fail("batch.ratio", "needs a local dataset size");
  return std::max(1, static_cast<int>(std::lround(*batch_ratio * *local_size)));
}

HyperParams ExperimentConfig::admm_params(const std::string& algorithm, int batch) const {
  const auto it = params.find(algorithm);
  const AlgorithmParams p = it == params.end() ? AlgorithmParams{} : it->second;
  HyperParams hp;
  hp.rho = require(p.rho, algorithm + ".rho");
  hp.tau = require(p.tau, algorithm + ".tau");
  hp.gamma = p.gamma.value_or(1.0);
  if (algorithm == "asi-admm") {
    hp.eta_bar = require(p.eta_bar, algorithm + ".eta_bar");
    hp.iota_sq = require(p.iota_sq, algorithm + ".iota_sq");
  } else {
    hp.eta_bar = 0.0;
    hp.iota_sq = p.iota_sq.value_or(1.0);
  }
  hp.batch_size = batch;
  return hp;
}

double ExperimentConfig::baseline_step(const std::string& algorithm) const {
  const auto it = params.find(algorithm);
  if (it == params.end() || !it->second.step) fail(algorithm + ".step", "missing");
  return *it->second.step;
}

int ExperimentConfig::horizon() const {
  return kind == ExperimentKind::kResource ? resource.intervals : localization.horizon;
}

std::string format_double(double v) { return shortest(v); }

std::vector<std::string> preset_names() {
  return {"fig3-ridge",        "fig3-logistic",  "fig5-localization-5", "fig5-localization-10",
          "fig6-hetero-5",     "fig6-hetero-10", "fig7-resource-2",     "fig7-resource-5"};
}

ExperimentConfig make_preset(const std::string& name) {
  ExperimentConfig c;
  if (name == "fig3-ridge") {
    c = regression_base(ExperimentKind::kRidge);
    c.algorithms = {"asi-admm", "si-admm", "i-admm", "dgd", "extra", "igd"};
    c.params["asi-admm"] = {.rho = 3.0, .tau = 0.2, .gamma = 1.0, .eta_bar = 0.9, .iota_sq = 10.0};
    c.params["si-admm"] = {.rho = 3.0, .tau = 0.5, .gamma = 1.0};
    c.params["i-admm"] = {.rho = 3.0, .tau = 0.5, .gamma = 1.0};
    c.params["dgd"] = {.step = 0.5};
    c.params["extra"] = {.step = 0.5};
    c.params["igd"] = {.step = 0.01};
    c.regression.dim = 10;
    c.regression.feature_scale = 1.0 / std::sqrt(10.0);
  } else if (name == "fig3-logistic") {
    c = regression_base(ExperimentKind::kLogistic);
    c.algorithms = {"asi-admm", "si-admm", "i-admm", "dgd", "extra", "igd"};
    c.params["asi-admm"] = {.rho = 1.0, .tau = 0.2, .gamma = 1.0, .eta_bar = 0.9, .iota_sq = 10.0};
    c.params["si-admm"] = {.rho = 1.0, .tau = 0.2, .gamma = 1.0};
    c.params["i-admm"] = {.rho = 1.0, .tau = 0.2, .gamma = 1.0};
    c.params["dgd"] = {.step = 0.05};
    c.params["extra"] = {.step = 0.05};
    c.params["igd"] = {.step = 0.05};
    c.regression.dim = 2;
  } else if (name == "fig5-localization-5") {
    c = localization_base(5, 0.3);
    c.params["igd"] = {.step = 0.095};
    c.params["dgd"] = {.step = 0.09};
  } else if (name == "fig5-localization-10") {
    c = localization_base(10, 0.8);
    c.params["igd"] = {.step = 0.095};
    c.params["dgd"] = {.step = 0.09};
  } else if (name == "fig6-hetero-5") {
    c = localization_base(5, 0.3);
    c.localization.heterogeneous = true;
    c.params["igd"] = {.step = 0.095};
    c.params["dgd"] = {.step = 0.095};
  } else if (name == "fig6-hetero-10") {
    c = localization_base(10, 0.8);
    c.localization.heterogeneous = true;
    c.params["igd"] = {.step = 0.01};
    c.params["dgd"] = {.step = 0.01};
  } else if (name == "fig7-resource-2") {
    c = resource_base(2);
  } else if (name == "fig7-resource-5") {
    c = resource_base(5);
  } else {
    std::string known;
    for (const auto& p : preset_names()) known += (known.empty() ? "" : ", ") + p;
    fail("preset", "unknown preset '" + name + "' (known: " + known + ")");
  }
  c.preset = name;
  return c;
}

namespace {

void apply_yaml(const YAML::Node& doc, ExperimentConfig& c) {
  if (!doc.IsMap()) fail("config", "top level must be a mapping");
  if (doc["kind"]) c.kind = parse_experiment_kind(doc["kind"].as<std::string>());
  if (const auto a = doc["algorithms"]) {
    if (a.IsScalar()) {
      c.algorithms = {a.as<std::string>()};
    } else {
      read(doc, "algorithms", c.algorithms);
    }
  }
  if (const auto a = doc["algorithm"]) c.algorithms = {a.as<std::string>()};
  read(doc, "n_agents", c.n_agents);
  read(doc, "omega", c.omega);
  read(doc, "iterations", c.iterations);
  read(doc, "seeds", c.seeds);
  read(doc, "stride", c.stride);
  read(doc, "output", c.output_dir);
  read(doc, "wall_time", c.wall_time);
  read(doc, "jobs", c.jobs);

  if (const auto b = doc["batch"]) {
    if (b["ratio"] && b["size"]) fail("batch", "ratio and size are mutually exclusive");
    if (b["ratio"]) {
      c.batch_size.reset();
      read_opt(b, "ratio", c.batch_ratio, "batch.");
    }
    if (b["size"]) {
      c.batch_ratio.reset();
      read_opt(b, "size", c.batch_size, "batch.");
    }
  }

  if (const auto params = doc["params"]) {
    if (!params.IsMap()) fail("params", "must be a mapping of algorithm names");
    for (const auto& kv : params) {
      const auto name = kv.first.as<std::string>();
      if (!is_known(name)) fail("params", "unknown algorithm '" + name + "'");
      AlgorithmParams& p = c.params[name];
      const std::string prefix = name + ".";
      read_opt(kv.second, "rho", p.rho, prefix);
      read_opt(kv.second, "tau", p.tau, prefix);
      read_opt(kv.second, "gamma", p.gamma, prefix);
      read_opt(kv.second, "eta_bar", p.eta_bar, prefix);
      read_opt(kv.second, "iota_sq", p.iota_sq, prefix);
      read_opt(kv.second, "step", p.step, prefix);
    }
  }

  if (const auto r = doc["regression"]) {
    const std::string p = "regression.";
    read(r, "samples_per_agent", c.regression.samples_per_agent, p);
    read(r, "dim", c.regression.dim, p);
    read(r, "noise_sigma", c.regression.noise_sigma, p);
    read(r, "feature_scale", c.regression.feature_scale, p);
    read(r, "l2", c.regression.l2, p);
  }
  if (const auto l = doc["localization"]) {
    const std::string p = "localization.";
    auto& lc = c.localization;
    read(l, "grid_size", lc.grid_size, p);
    read(l, "target_x", lc.target_x, p);
    read(l, "target_y", lc.target_y, p);
    read(l, "d0", lc.d0, p);
    read(l, "base_reward", lc.base_reward, p);
    read(l, "heterogeneous", lc.heterogeneous, p);
    read(l, "l0", lc.l0, p);
    read(l, "nu", lc.nu, p);
    read(l, "p0", lc.p0, p);
    read(l, "rss_noise", lc.rss_noise, p);
    read(l, "oracle_state", lc.oracle_state, p);
    read(l, "horizon", lc.horizon, p);
    read(l, "discount", lc.discount, p);
  }
  if (const auto r = doc["resource"]) {
    const std::string p = "resource.";
    auto& rc = c.resource;
    read(r, "capacity", rc.capacity, p);
    read(r, "arrival_rate", rc.arrival_rate, p);
    read(r, "workload_mean", rc.workload_mean, p);
    read(r, "h0", rc.h0, p);
    read(r, "h1", rc.h1, p);
    read(r, "h2", rc.h2, p);
    read(r, "h3", rc.h3, p);
    read(r, "price", rc.price, p);
    read(r, "intervals", rc.intervals, p);
    read(r, "discount", rc.discount, p);
  }
  if (const auto r = doc["rl"]) {
    const std::string p = "rl.";
    read(r, "loss_scale", c.rl.loss_scale, p);
    read(r, "eval_episodes", c.rl.eval_episodes, p);
    read(r, "reward_window", c.rl.reward_window, p);
    read(r, "trace_intervals", c.rl.trace_intervals, p);
  }
  c.localization.n_agents = c.n_agents;
}

void emit_opt(YAML::Emitter& out, const char* key, const std::optional<double>& v) {
  if (v) out << YAML::Key << key << YAML::Value << shortest(*v);
}

}  // namespace

ExperimentConfig load_config(std::istream& is) {
  YAML::Node doc;
  try {
    doc = YAML::Load(is);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  if (doc.IsMap() && doc["preset"] && !doc["preset"].IsNull()) {
    c = make_preset(doc["preset"].as<std::string>());
  }
  apply_yaml(doc, c);
  c.validate();
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  return load_config(in);
}

void save_config(std::ostream& os, const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  if (!c.preset.empty()) out << YAML::Key << "preset" << YAML::Value << c.preset;
  out << YAML::Key << "kind" << YAML::Value << to_string(c.kind);
  out << YAML::Key << "algorithms" << YAML::Value << YAML::Flow << c.algorithms;
  out << YAML::Key << "n_agents" << YAML::Value << c.n_agents;
  out << YAML::Key << "omega" << YAML::Value << shortest(c.omega);
  out << YAML::Key << "iterations" << YAML::Value << c.iterations;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.seeds;
  out << YAML::Key << "stride" << YAML::Value << c.stride;
  out << YAML::Key << "output" << YAML::Value << c.output_dir;
  out << YAML::Key << "wall_time" << YAML::Value << c.wall_time;
  out << YAML::Key << "jobs" << YAML::Value << c.jobs;

  out << YAML::Key << "batch" << YAML::Value << YAML::BeginMap;
  if (c.batch_ratio) out << YAML::Key << "ratio" << YAML::Value << shortest(*c.batch_ratio);
  if (c.batch_size) out << YAML::Key << "size" << YAML::Value << *c.batch_size;
  out << YAML::EndMap;

  out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, p] : c.params) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    emit_opt(out, "rho", p.rho);
    emit_opt(out, "tau", p.tau);
    emit_opt(out, "gamma", p.gamma);
    emit_opt(out, "eta_bar", p.eta_bar);
    emit_opt(out, "iota_sq", p.iota_sq);
    emit_opt(out, "step", p.step);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;

  if (is_rl(c.kind)) {
    out << YAML::Key << "rl" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "loss_scale" << YAML::Value << shortest(c.rl.loss_scale);
    out << YAML::Key << "eval_episodes" << YAML::Value << c.rl.eval_episodes;
    out << YAML::Key << "reward_window" << YAML::Value << c.rl.reward_window;
    out << YAML::Key << "trace_intervals" << YAML::Value << c.rl.trace_intervals;
    out << YAML::EndMap;
  }
  if (c.kind == ExperimentKind::kLocalization) {
    const auto& lc = c.localization;
    out << YAML::Key << "localization" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "grid_size" << YAML::Value << lc.grid_size;
    out << YAML::Key << "target_x" << YAML::Value << lc.target_x;
    out << YAML::Key << "target_y" << YAML::Value << lc.target_y;
    out << YAML::Key << "d0" << YAML::Value << shortest(lc.d0);
    out << YAML::Key << "base_reward" << YAML::Value << shortest(lc.base_reward);
    out << YAML::Key << "heterogeneous" << YAML::Value << lc.heterogeneous;
    out << YAML::Key << "l0" << YAML::Value << shortest(lc.l0);
    out << YAML::Key << "nu" << YAML::Value << shortest(lc.nu);
    out << YAML::Key << "p0" << YAML::Value << shortest(lc.p0);
    out << YAML::Key << "rss_noise" << YAML::Value << shortest(lc.rss_noise);
    out << YAML::Key << "oracle_state" << YAML::Value << lc.oracle_state;
    out << YAML::Key << "horizon" << YAML::Value << lc.horizon;
    out << YAML::Key << "discount" << YAML::Value << shortest(lc.discount);
    out << YAML::EndMap;
  } else if (c.kind == ExperimentKind::kResource) {
    const auto& rc = c.resource;
    out << YAML::Key << "resource" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "capacity" << YAML::Value << rc.capacity;
    out << YAML::Key << "arrival_rate" << YAML::Value << shortest(rc.arrival_rate);
    out << YAML::Key << "workload_mean" << YAML::Value << shortest(rc.workload_mean);
    out << YAML::Key << "h0" << YAML::Value << shortest(rc.h0);
    out << YAML::Key << "h1" << YAML::Value << shortest(rc.h1);
    out << YAML::Key << "h2" << YAML::Value << shortest(rc.h2);
    out << YAML::Key << "h3" << YAML::Value << shortest(rc.h3);
    out << YAML::Key << "price" << YAML::Value << shortest(rc.price);
    out << YAML::Key << "intervals" << YAML::Value << rc.intervals;
    out << YAML::Key << "discount" << YAML::Value << shortest(rc.discount);
    out << YAML::EndMap;
  } else {
    const auto& r = c.regression;
    out << YAML::Key << "regression" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "samples_per_agent" << YAML::Value << r.samples_per_agent;
    out << YAML::Key << "dim" << YAML::Value << r.dim;
    out << YAML::Key << "noise_sigma" << YAML::Value << shortest(r.noise_sigma);
    out << YAML::Key << "feature_scale" << YAML::Value << shortest(r.feature_scale);
    out << YAML::Key << "l2" << YAML::Value << shortest(r.l2);
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  os << out.c_str() << '\n';
}

}  // namespace decadmm
