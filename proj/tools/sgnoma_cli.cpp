// Experiment front-end: seeded runs and sweeps, CSV emission, and a
// convergence-time summary over a finished output directory.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sgnoma/experiment.hpp"

namespace fs = std::filesystem;
using namespace sgnoma;

namespace {

struct CommonArgs {
  std::string spec_path;
  std::string out_dir;
  std::string scheme;
  std::uint64_t seed = 0;
  int episodes = 0;
  int timeslots = 0;
  int levels = 0;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("spec", args.spec_path, "experiment spec file (flat key = value)")
      ->required();
  cmd->add_option("--out", args.out_dir, "output directory (overrides run.out_dir)");
  cmd->add_option("--scheme", args.scheme, "restrict to one scheme: full-maql|full-mad|homad");
  cmd->add_option("--seed", args.seed, "override run.seed");
  cmd->add_option("--episodes", args.episodes, "override train.episodes");
  cmd->add_option("--timeslots", args.timeslots, "override train.timeslots");
  cmd->add_option("--levels", args.levels, "override rl.levels");
  cmd->add_option("--workers", args.workers, "parallel run slots (default: SGNOMA_WORKERS or cores)");
}

ExperimentSpec spec_with_overrides(const CommonArgs& args) {
  ExperimentSpec spec = load_config(args.spec_path);
  if (!args.out_dir.empty()) spec.out_dir = args.out_dir;
  if (args.seed != 0) spec.base_seed = args.seed;
  if (args.episodes > 0) spec.episodes = args.episodes;
  if (args.timeslots > 0) spec.timeslots = args.timeslots;
  if (args.levels > 0) spec.levels = args.levels;
  if (!args.scheme.empty()) {
    const auto s = scheme_from_string(args.scheme);
    if (!s) throw std::runtime_error("unknown scheme: " + args.scheme);
    spec.schemes = {*s};
  }
  return spec;
}

int run_and_report(const ExperimentSpec& spec, int workers) {
  const auto rows = run_experiment(spec, workers);
  int failures = 0;
  for (const auto& r : rows) failures += (r.status != "ok");
  std::printf("%zu runs -> %s/results.csv (%d failed)\n", rows.size(), spec.out_dir.c_str(),
              failures);
  return failures == 0 ? 0 : 1;
}

int summarize_dir(const std::string& dir) {
  const std::string timings_path = dir + "/timings.csv";
  std::ifstream is(timings_path);
  if (!is) {
    std::cerr << "no timings.csv under " << dir << "\n";
    return 1;
  }
  std::vector<RunTiming> runs;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    RunTiming t;
    std::string sweep, seed, mean_s, conv;
    std::getline(ls, t.scheme, ',');
    std::getline(ls, sweep, ',');
    std::getline(ls, seed, ',');
    std::getline(ls, mean_s, ',');
    std::getline(ls, conv, ',');
    t.mean_episode_s = std::stod(mean_s);
    t.convergence_episode = std::stoi(conv);
    runs.push_back(std::move(t));
  }
  const auto rows = summarize_convergence(runs);
  const std::string table = format_summary_table(rows);
  std::cout << table;
  std::ofstream os(dir + "/summary.txt");
  os << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-grant-free NOMA energy-efficiency simulator"};
  app.require_subcommand(1);

  CommonArgs run_args, sweep_args;
  auto* run_cmd = app.add_subcommand("run", "single-scenario run (sweep axis ignored)");
  add_common(run_cmd, run_args);
  auto* sweep_cmd = app.add_subcommand("sweep", "full sweep per the spec's sweep axis");
  add_common(sweep_cmd, sweep_args);

  std::string summarize_path;
  auto* sum_cmd = app.add_subcommand("summarize", "convergence-time table for a results dir");
  sum_cmd->add_option("dir", summarize_path, "experiment output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      auto spec = spec_with_overrides(run_args);
      spec.sweep_axis = "none";
      return run_and_report(spec, run_args.workers);
    }
    if (sweep_cmd->parsed()) {
      const auto spec = spec_with_overrides(sweep_args);
      return run_and_report(spec, sweep_args.workers);
    }
    if (sum_cmd->parsed()) return summarize_dir(summarize_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
