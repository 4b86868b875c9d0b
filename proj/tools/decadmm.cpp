#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decadmm/config.hpp"
#include "decadmm/runner.hpp"
#include "decadmm/selftest.hpp"

namespace {

struct RunOptions {
  std::string preset;
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::optional<std::int64_t> iters;
  std::optional<int> stride;
  std::optional<int> jobs;
  std::string out;
  std::vector<std::string> algorithms;
  bool wall_time = false;
};

int do_run(const RunOptions& o) {
  decadmm::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = decadmm::load_config_file(o.config);
  } else if (!o.preset.empty()) {
    cfg = decadmm::make_preset(o.preset);
  } else {
    throw decadmm::ConfigError("run: give --preset or --config");
  }
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.iters) cfg.iterations = *o.iters;
  if (o.stride) cfg.stride = *o.stride;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.algorithms.empty()) cfg.algorithms = o.algorithms;
  if (o.wall_time) cfg.wall_time = true;
  cfg.validate();
  const auto result = decadmm::run(cfg);
  std::cout << "wrote " << result.output_dir.string() << " (effective omega "
            << result.effective_omega << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized consensus optimization by incremental ADMM"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV and SVG output");
  auto* preset = run->add_option("--preset", run_opts.preset, "Preset name");
  preset->check(CLI::IsMember(decadmm::preset_names()));
  run->add_option("--config", run_opts.config, "YAML config file")->excludes(preset);
  run->add_option("--seed", run_opts.seeds, "Seed(s), replacing the configured list");
  run->add_option("--iters", run_opts.iters, "Iterations K");
  run->add_option("--stride", run_opts.stride, "Metric stride");
  run->add_option("--jobs", run_opts.jobs, "Concurrent runs");
  run->add_option("--out", run_opts.out,
                  "Output directory (default $DECADMM_OUTPUT_ROOT/<preset>)");
  run->add_option("--algorithm", run_opts.algorithms, "Algorithm(s) to run")
      ->check(CLI::IsMember(decadmm::known_algorithms()));
  run->add_flag("--wall-time", run_opts.wall_time, "Record wall-clock time");

  std::vector<std::string> dirs;
  std::string compare_out = "compare.svg";
  auto* cmp = app.add_subcommand("compare", "Overlay the results of several runs");
  cmp->add_option("dirs", dirs, "Result directories")->required();
  cmp->add_option("--out", compare_out, "Output SVG");

  bool list_presets = false;
  auto* presets = app.add_subcommand("presets", "List preset names");
  presets->add_flag("--yaml", list_presets, "Print each preset's resolved config");

  auto* selftest = app.add_subcommand("selftest", "Run the property suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return do_run(run_opts);
    if (*cmp) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      decadmm::compare(paths, compare_out);
      std::cout << "wrote " << compare_out << '\n';
      return 0;
    }
    if (*presets) {
      for (const auto& name : decadmm::preset_names()) {
        if (list_presets) {
          std::cout << "# " << name << '\n';
          decadmm::save_config(std::cout, decadmm::make_preset(name));
        } else {
          std::cout << name << '\n';
        }
      }
      return 0;
    }
    if (*selftest) return decadmm::run_selftest(std::cout) ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "decadmm: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
