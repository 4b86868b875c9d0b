#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decadmm/config.hpp"
#include "decadmm/metrics.hpp"
#include "decadmm/plot.hpp"

namespace decadmm {

/// `git describe`-style identifier baked in at build time.
std::string build_id();

/// Output root used when a config leaves `output` empty: $DECADMM_OUTPUT_ROOT,
/// else "results".
std::filesystem::path default_output_root();

/// Resource runs only: the learned policy (mean θ across agents) and the
/// uniform-random policy (θ = 0) rolled out for `trace_intervals` intervals.
struct PolicyTrace {
  Trajectory learned;
  Trajectory random;
  double learned_profit = 0.0;  // mean reward per interval
  double random_profit = 0.0;
};

struct SeedRun {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<MetricsRecord> records;  // k = stride, 2·stride, ..., K
  std::vector<Vector> final_thetas;
  double effective_omega = 0.0;
  std::optional<PolicyTrace> trace;
};

/// One (algorithm, seed) run. Pure function of its arguments.
SeedRun run_seed(const ExperimentConfig& cfg, const std::string& algorithm, std::uint64_t seed);

struct AggregateStat {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
};

struct AggregateRow {
  std::int64_t k = 0;
  double comm_scalars = 0.0;  // median across seeds
  std::optional<AggregateStat> accuracy;
  std::optional<AggregateStat> consensus_error;
  std::optional<AggregateStat> avg_reward;
  std::optional<AggregateStat> lyapunov;
};

/// Seed-wise median and min/max per record index. A trailing moving average
/// of `reward_window` records is applied to each seed's reward first.
std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRecord>>& seeds,
                                    int reward_window);

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> read_aggregate_csv(std::istream& is);

struct RunResult {
  std::filesystem::path output_dir;
  double effective_omega = 0.0;
  std::map<std::string, std::vector<SeedRun>> runs;  // by algorithm, seeds in config order
};

/// Runs every (algorithm, seed) pair on `cfg.jobs` threads, then writes under
/// the output directory: config.yaml, metadata.yaml, <algo>/seed_<S>.csv,
/// <algo>/aggregate.csv, <algo>/plot.svg, plot.svg and, for resource runs,
/// <algo>/policy_trace_seed_<S>.csv plus profit.csv.
RunResult run(const ExperimentConfig& cfg);

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Overlay of the median curves in several run directories. Throws
/// SchemaError when the directories hold different experiment kinds.
PlotSpec compare_plot(const std::vector<std::filesystem::path>& dirs);
void compare(const std::vector<std::filesystem::path>& dirs, const std::filesystem::path& svg_out);

}  // namespace decadmm
