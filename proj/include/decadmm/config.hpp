#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "decadmm/admm.hpp"
#include "decadmm/rl.hpp"

namespace decadmm {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ExperimentKind { kRidge, kLogistic, kLocalization, kResource };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);
bool is_rl(ExperimentKind k);

/// Algorithms selectable by name.
inline const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> names = {"asi-admm", "si-admm", "i-admm",
                                                 "dgd",      "extra",   "igd"};
  return names;
}

/// Per-algorithm parameters. Unset fields must be filled by a preset or the
/// config file; validation names the missing one.
struct AlgorithmParams {
  std::optional<double> rho{};
  std::optional<double> tau{};
  std::optional<double> gamma{};
  std::optional<double> eta_bar{};
  std::optional<double> iota_sq{};
  std::optional<double> step{};  // baselines only
};

struct RegressionSettings {
  int samples_per_agent = 100;
  int dim = 10;
  double noise_sigma = 0.1;
  double feature_scale = 1.0;
  double l2 = 0.0;
};

struct RlSettings {
  double loss_scale = 1.0;
  int eval_episodes = 5;
  int reward_window = 10;     // records, applied in the aggregate
  int trace_intervals = 300;  // resource policy trace
};

struct ExperimentConfig {
  std::string preset;
  ExperimentKind kind = ExperimentKind::kRidge;
  std::vector<std::string> algorithms;
  std::map<std::string, AlgorithmParams> params;
  int n_agents = 20;
  double omega = 0.3;
  std::optional<double> batch_ratio;
  std::optional<int> batch_size;
  std::int64_t iterations = 1000;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  int stride = 1;
  std::string output_dir;
  bool wall_time = false;
  int jobs = 1;

  RegressionSettings regression;
  LocalizationConfig localization;
  ResourceConfig resource;
  RlSettings rl;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// Mini-batch size M for an agent with `local_size` samples (RL: no local set).
  int resolved_batch(std::optional<int> local_size) const;

  HyperParams admm_params(const std::string& algorithm, int batch) const;
  double baseline_step(const std::string& algorithm) const;
  int horizon() const;
};

/// Shortest decimal text that reads back as the same double.
std::string format_double(double v);

std::vector<std::string> preset_names();
ExperimentConfig make_preset(const std::string& name);

/// YAML text. Keys absent from the document keep the value already in `cfg`,
/// so a file can refine a preset named by its `preset` key.
ExperimentConfig load_config(std::istream& is);
ExperimentConfig load_config_file(const std::string& path);
void save_config(std::ostream& os, const ExperimentConfig& cfg);

}  // namespace decadmm
