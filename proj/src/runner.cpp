#include "decadmm/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "decadmm/admm.hpp"
#include "decadmm/baselines.hpp"
#include "decadmm/graph.hpp"
#include "decadmm/problems.hpp"
#include "decadmm/rl.hpp"

#ifndef DECADMM_BUILD_ID
#define DECADMM_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;

namespace decadmm {

std::string build_id() { return DECADMM_BUILD_ID; }

fs::path default_output_root() {
  const char* env = std::getenv("DECADMM_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("results");
}

namespace {

// Stream indices for evaluation draws that are not tied to an iteration.
constexpr std::uint64_t kTraceLearned = 0xffffffff00000001ULL;
constexpr std::uint64_t kTraceRandom = 0xffffffff00000002ULL;

struct Problem {
  std::vector<std::shared_ptr<const Objective>> objectives;
  std::optional<Vector> theta_star;
  std::optional<int> local_size;
  std::shared_ptr<const ResourceEnv> resource;
};

Problem build_problem(const ExperimentConfig& cfg, std::uint64_t seed) {
  Problem p;
  const int n = cfg.n_agents;
  switch (cfg.kind) {
    case ExperimentKind::kRidge:
    case ExperimentKind::kLogistic: {
      const auto& r = cfg.regression;
      const bool ridge = cfg.kind == ExperimentKind::kRidge;
      const RegressionKind kind = ridge ? RegressionKind::kRidge : RegressionKind::kLogistic;
      SynthesizedProblem prob =
          ridge ? synthesize_ridge(n, r.samples_per_agent, r.dim, r.noise_sigma, seed,
                                   r.feature_scale)
                : synthesize_logistic(n, r.samples_per_agent, r.dim, seed);
      p.objectives = make_regression_objectives(kind, prob.datasets, r.l2);
      p.theta_star = centralized_solve(kind, prob.datasets, r.l2).theta;
      p.local_size = r.samples_per_agent;
      break;
    }
    case ExperimentKind::kLocalization: {
      LocalizationConfig lc = cfg.localization;
      lc.n_agents = n;
      for (auto& mdp : make_localization_env(lc)) {
        p.objectives.push_back(std::make_shared<PolicyObjective>(mdp, cfg.rl.loss_scale));
      }
      break;
    }
    case ExperimentKind::kResource: {
      p.resource = make_resource_env(cfg.resource);
      for (int i = 0; i < n; ++i) {
        p.objectives.push_back(std::make_shared<PolicyObjective>(p.resource, cfg.rl.loss_scale));
      }
      break;
    }
  }
  return p;
}

std::unique_ptr<DecentralizedSolver> build_solver(const ExperimentConfig& cfg,
                                                  const std::string& algorithm,
                                                  const NetworkGraph& graph, const Problem& p,
                                                  int batch, std::uint64_t seed) {
  if (algorithm == "asi-admm" || algorithm == "si-admm" || algorithm == "i-admm") {
    const AdmmVariant v = algorithm == "asi-admm"  ? AdmmVariant::kAdaptive
                          : algorithm == "si-admm" ? AdmmVariant::kStochastic
                                                   : AdmmVariant::kFullBatch;
    return std::make_unique<IncrementalAdmm>(graph, p.objectives, cfg.admm_params(algorithm, batch),
                                             v, seed);
  }
  const double step = cfg.baseline_step(algorithm);
  // regression gossip baselines use exact local gradients; IGD and all RL runs sample
  const bool exact = !is_rl(cfg.kind) && algorithm != "igd";
  const GradientSource source{exact ? 0 : batch};
  if (algorithm == "dgd") return std::make_unique<DgdSolver>(graph, p.objectives, step, source, seed);
  if (algorithm == "extra") {
    return std::make_unique<ExtraSolver>(graph, p.objectives, step, source, seed);
  }
  if (algorithm == "igd") return std::make_unique<IgdSolver>(graph, p.objectives, step, source, seed);
  throw ConfigError("algorithms: unknown algorithm '" + algorithm + "'");
}

double evaluate_reward(const ExperimentConfig& cfg, const Problem& p,
                       const std::vector<Vector>& thetas, std::uint64_t seed, std::int64_t k) {
  std::vector<double> returns;
  returns.reserve(thetas.size());
  const std::uint64_t base = split_seed(seed, Stream::kEvaluation, static_cast<std::uint64_t>(k));
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    Rng rng = make_rng(base, Stream::kEvaluation, i);
    const auto& obj = static_cast<const PolicyObjective&>(*p.objectives[i]);
    double sum = 0.0;
    for (int e = 0; e < cfg.rl.eval_episodes; ++e) sum += obj.episode_reward(thetas[i], rng);
    returns.push_back(sum / cfg.rl.eval_episodes);
  }
  return avg_reward(returns);
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& cfg, const std::string& algorithm, std::uint64_t seed) {
  cfg.validate();
  SeedRun out;
  out.algorithm = algorithm;
  out.seed = seed;

  const NetworkGraph graph = generate_network(cfg.n_agents, cfg.omega, seed, BudgetPolicy::kClamp);
  out.effective_omega = graph.effective_omega();
  const Problem p = build_problem(cfg, seed);
  const int batch = cfg.resolved_batch(p.local_size);
  auto solver = build_solver(cfg, algorithm, graph, p, batch, seed);

  const std::vector<Vector> thetas0 = solver->thetas();
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t k = 1; k <= cfg.iterations; ++k) {
    solver->step();
    if (k % cfg.stride != 0 && k != cfg.iterations) continue;
    MetricsRecord rec;
    rec.k = k;
    rec.comm_scalars = solver->comm_scalars();
    const auto thetas = solver->thetas();
    if (p.theta_star) rec.accuracy = accuracy(thetas, thetas0, *p.theta_star);
    rec.consensus_error = consensus_error(thetas);
    if (is_rl(cfg.kind)) rec.avg_reward = evaluate_reward(cfg, p, thetas, seed, k);
    rec.lyapunov = solver->lyapunov();
    if (cfg.wall_time) {
      rec.wall_time_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    out.records.push_back(rec);
  }
  out.final_thetas = solver->thetas();

  if (p.resource) {
    Vector mean = Vector::Zero(p.objectives.front()->dim());
    for (const auto& t : out.final_thetas) mean += t;
    mean /= static_cast<double>(out.final_thetas.size());
    PolicyTrace trace;
    const int T = cfg.rl.trace_intervals;
    Rng learned_rng = make_rng(seed, Stream::kEvaluation, kTraceLearned);
    Rng random_rng = make_rng(seed, Stream::kEvaluation, kTraceRandom);
    trace.learned = sample_trajectory(*p.resource, mean, T, learned_rng);
    trace.random = sample_trajectory(*p.resource, Vector::Zero(mean.size()), T, random_rng);
    trace.learned_profit = trace.learned.total_reward() / T;
    trace.random_profit = trace.random.total_reward() / T;
    out.trace = std::move(trace);
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<AggregateStat> stat_of(const std::vector<std::optional<double>>& values) {
  std::vector<double> v;
  for (const auto& x : values) {
    if (!x) return std::nullopt;
    v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  AggregateStat s;
  s.median = median_of(v);
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

std::string cell(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRecord>>& seeds,
                                    int reward_window) {
  if (seeds.empty()) return {};
  const std::size_t n = seeds.front().size();
  for (const auto& s : seeds) {
    if (s.size() != n) throw InvalidArgument("aggregate: seeds recorded different numbers of rows");
  }
  // smoothed reward per seed
  std::vector<std::vector<std::optional<double>>> rewards(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    std::vector<double> raw;
    for (const auto& r : seeds[s]) {
      if (!r.avg_reward) break;
      raw.push_back(*r.avg_reward);
    }
    rewards[s].assign(n, std::nullopt);
    if (raw.size() == n) {
      const auto smooth = moving_average(raw, reward_window);
      for (std::size_t j = 0; j < n; ++j) rewards[s][j] = smooth[j];
    }
  }

  std::vector<AggregateRow> rows;
  rows.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    AggregateRow row;
    row.k = seeds.front()[j].k;
    std::vector<double> comm;
    std::vector<std::optional<double>> acc, cons, rew, lyap;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const MetricsRecord& r = seeds[s][j];
      if (r.k != row.k) throw InvalidArgument("aggregate: seeds disagree on k");
      comm.push_back(static_cast<double>(r.comm_scalars));
      acc.push_back(r.accuracy);
      cons.push_back(r.consensus_error);
      rew.push_back(rewards[s][j]);
      lyap.push_back(r.lyapunov);
    }
    row.comm_scalars = median_of(comm);
    row.accuracy = stat_of(acc);
    row.consensus_error = stat_of(cons);
    row.avg_reward = stat_of(rew);
    row.lyapunov = stat_of(lyap);
    rows.push_back(row);
  }
  return rows;
}

namespace {

const char* const kMetricNames[] = {"accuracy", "consensus_error", "avg_reward", "lyapunov"};

std::optional<AggregateStat> AggregateRow::*const kMetricFields[] = {
    &AggregateRow::accuracy, &AggregateRow::consensus_error, &AggregateRow::avg_reward,
    &AggregateRow::lyapunov};

std::string aggregate_header() {
  std::string h = "k,comm_scalars";
  for (const char* m : kMetricNames) {
    h += std::string(",") + m + "_median," + m + "_min," + m + "_max";
  }
  return h;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(std::string("aggregate csv: bad ") + what + " value '" + s + "'");
  }
}

}  // namespace

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << aggregate_header() << '\n';
  for (const auto& r : rows) {
    os << r.k << ',' << cell(r.comm_scalars);
    for (auto field : kMetricFields) {
      const auto& s = r.*field;
      if (s) {
        os << ',' << cell(s->median) << ',' << cell(s->min) << ',' << cell(s->max);
      } else {
        os << ",,,";
      }
    }
    os << '\n';
  }
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("aggregate csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != aggregate_header()) throw SchemaError("aggregate csv: unexpected header '" + line + "'");
  std::vector<AggregateRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 14) throw SchemaError("aggregate csv: expected 14 columns");
    AggregateRow r;
    r.k = static_cast<std::int64_t>(parse_double(cells[0], "k"));
    r.comm_scalars = parse_double(cells[1], "comm_scalars");
    for (std::size_t m = 0; m < 4; ++m) {
      const std::size_t c = 2 + 3 * m;
      if (cells[c].empty()) continue;
      r.*kMetricFields[m] = AggregateStat{parse_double(cells[c], kMetricNames[m]),
                                          parse_double(cells[c + 1], kMetricNames[m]),
                                          parse_double(cells[c + 2], kMetricNames[m])};
    }
    rows.push_back(r);
  }
  return rows;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

fs::path resolve_output(const ExperimentConfig& cfg) {
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return default_output_root() / (cfg.preset.empty() ? to_string(cfg.kind) : cfg.preset);
}

Series series_of(const std::string& label, const std::vector<AggregateRow>& rows, bool rl) {
  Series s;
  s.label = label;
  for (const auto& r : rows) {
    const auto& stat = rl ? r.avg_reward : r.accuracy;
    if (!stat) continue;
    s.x.push_back(rl ? static_cast<double>(r.k) : r.comm_scalars);
    s.y.push_back(stat->median);
    s.lo.push_back(stat->min);
    s.hi.push_back(stat->max);
  }
  return s;
}

PlotSpec base_plot(ExperimentKind kind) {
  PlotSpec spec;
  if (is_rl(kind)) {
    spec.title = to_string(kind) + ": average reward";
    spec.x_label = "iteration";
    spec.y_label = "globally averaged reward";
  } else {
    spec.title = to_string(kind) + ": accuracy";
    spec.x_label = "communication cost (scalars)";
    spec.y_label = "accuracy";
    spec.log_x = true;
    spec.log_y = true;
  }
  return spec;
}

struct RunDirInfo {
  ExperimentKind kind;
  std::vector<std::string> algorithms;
};

RunDirInfo read_run_dir(const fs::path& dir) {
  const fs::path meta = dir / "metadata.yaml";
  if (!fs::exists(meta)) throw SchemaError("'" + dir.string() + "' has no metadata.yaml");
  YAML::Node doc;
  try {
    doc = YAML::LoadFile(meta.string());
  } catch (const YAML::Exception& e) {
    throw SchemaError("'" + meta.string() + "': " + e.what());
  }
  if (!doc["kind"] || !doc["algorithms"]) {
    throw SchemaError("'" + meta.string() + "' lacks kind or algorithms");
  }
  RunDirInfo info{parse_experiment_kind(doc["kind"].as<std::string>()),
                  doc["algorithms"].as<std::vector<std::string>>()};
  return info;
}

std::vector<AggregateRow> load_aggregate(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("missing '" + path.string() + "'");
  return read_aggregate_csv(in);
}

}  // namespace

PlotSpec compare_plot(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw InvalidArgument("compare needs at least one result directory");
  std::vector<RunDirInfo> infos;
  for (const auto& d : dirs) infos.push_back(read_run_dir(d));
  for (std::size_t i = 1; i < infos.size(); ++i) {
    if (infos[i].kind != infos[0].kind) {
      throw SchemaError("incompatible result sets: '" + dirs[0].string() + "' is " +
                        to_string(infos[0].kind) + ", '" + dirs[i].string() + "' is " +
                        to_string(infos[i].kind));
    }
  }
  std::map<std::string, int> uses;
  for (const auto& info : infos) {
    for (const auto& a : info.algorithms) ++uses[a];
  }
  const bool rl = is_rl(infos[0].kind);
  PlotSpec spec = base_plot(infos[0].kind);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (const auto& a : infos[i].algorithms) {
      const std::string label =
          uses[a] > 1 ? dirs[i].filename().string() + "/" + a : a;
      spec.series.push_back(series_of(label, load_aggregate(dirs[i] / a / "aggregate.csv"), rl));
    }
  }
  return spec;
}

void compare(const std::vector<fs::path>& dirs, const fs::path& svg_out) {
  const PlotSpec spec = compare_plot(dirs);
  if (svg_out.has_parent_path()) fs::create_directories(svg_out.parent_path());
  write_text(svg_out, render_svg(spec));
}

RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  RunResult result;
  result.output_dir = resolve_output(cfg);

  struct Task {
    std::string algorithm;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const auto& a : cfg.algorithms) {
    for (auto s : cfg.seeds) tasks.push_back({a, s});
  }
  std::vector<std::optional<SeedRun>> done(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        done[t] = run_seed(cfg, tasks[t].algorithm, tasks[t].seed);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    result.runs[tasks[t].algorithm].push_back(std::move(*done[t]));
  }
  result.effective_omega = result.runs.begin()->second.front().effective_omega;

  const fs::path& out = result.output_dir;
  fs::create_directories(out);
  {
    std::ostringstream o;
    save_config(o, cfg);
    write_text(out / "config.yaml", o.str());
  }
  {
    const NetworkGraph g = generate_network(cfg.n_agents, cfg.omega, cfg.seeds.front(),
                                            BudgetPolicy::kClamp);
    YAML::Emitter m;
    m << YAML::BeginMap;
    m << YAML::Key << "build_id" << YAML::Value << build_id();
    m << YAML::Key << "kind" << YAML::Value << to_string(cfg.kind);
    m << YAML::Key << "algorithms" << YAML::Value << YAML::Flow << cfg.algorithms;
    m << YAML::Key << "n_agents" << YAML::Value << cfg.n_agents;
    m << YAML::Key << "requested_omega" << YAML::Value << format_double(cfg.omega);
    m << YAML::Key << "effective_omega" << YAML::Value << format_double(result.effective_omega);
    m << YAML::Key << "edges" << YAML::Value << g.edges.size();
    m << YAML::Key << "comm_unit" << YAML::Value << "real scalars";
    m << YAML::EndMap;
    write_text(out / "metadata.yaml", std::string(m.c_str()) + "\n");
  }

  std::ostringstream profit;
  profit << "algorithm,seed,learned_profit,random_profit\n" << std::setprecision(17);
  const bool rl = is_rl(cfg.kind);
  for (const auto& a : cfg.algorithms) {
    const fs::path dir = out / a;
    fs::create_directories(dir);
    std::vector<std::vector<MetricsRecord>> per_seed;
    for (const auto& r : result.runs[a]) {
      std::ostringstream csv;
      write_metrics_csv(csv, r.records, cfg.wall_time);
      write_text(dir / ("seed_" + std::to_string(r.seed) + ".csv"), csv.str());
      per_seed.push_back(r.records);
      if (r.trace) {
        const Mdp& mdp = ResourceEnv(cfg.resource);
        std::ostringstream tr;
        tr << "policy,";
        std::ostringstream body;
        write_trajectory_csv(body, r.trace->learned, mdp);
        std::istringstream lines(body.str());
        std::string line;
        std::getline(lines, line);
        tr << line << '\n';
        while (std::getline(lines, line)) tr << "learned," << line << '\n';
        body.str("");
        write_trajectory_csv(body, r.trace->random, mdp);
        std::istringstream rlines(body.str());
        std::getline(rlines, line);
        while (std::getline(rlines, line)) tr << "random," << line << '\n';
        write_text(dir / ("policy_trace_seed_" + std::to_string(r.seed) + ".csv"), tr.str());
        profit << a << ',' << r.seed << ',' << r.trace->learned_profit << ','
               << r.trace->random_profit << '\n';
      }
    }
    const auto rows = aggregate(per_seed, rl ? cfg.rl.reward_window : 1);
    std::ostringstream agg;
    write_aggregate_csv(agg, rows);
    write_text(dir / "aggregate.csv", agg.str());
  }
  if (cfg.kind == ExperimentKind::kResource) write_text(out / "profit.csv", profit.str());

  // per-algorithm plots and the overlay go through the same reader as compare
  for (const auto& a : cfg.algorithms) {
    PlotSpec spec = base_plot(cfg.kind);
    spec.title += " (" + a + ")";
    spec.series.push_back(series_of(a, load_aggregate(out / a / "aggregate.csv"), rl));
    write_text(out / a / "plot.svg", render_svg(spec));
  }
  write_text(out / "plot.svg", render_svg(compare_plot({out})));
  return result;
}

}  // namespace decadmm
