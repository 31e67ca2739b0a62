#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgnoma/network.hpp"
#include "sgnoma/trainer.hpp"

namespace sgnoma {

// Table-driven cell description; defaults follow the experimental setup
// (500 m cell, numerologies 1/4, 23 dBm, F = 6 dB, N0 = -174 dBm/Hz,
// 32-byte packets, Pc = 0.05 W).
struct ScenarioParams {
  double cell_radius_m = 500.0;
  int urllc_users = 1, embb_users = 1, mmtc_users = 4;
  int embb_numerology = 1, urllc_numerology = 4;
  int embb_subchannels = 1, urllc_subchannels = 1;
  double embb_rate_bps_hz = 4.0;  // spectral-efficiency target, scaled by W_E
  double latency_ms = 2.0;        // D, shared by URLLC and mMTC
  double dep = 1e-5;              // epsilon
  double packet_bytes = 32.0;
  double max_power_dbm = 23.0;
  double circuit_power_w = 0.05;
  double noise_figure_db = 6.0;
  double noise_psd_dbm_hz = -174.0;
  double rician_k_db = 10.0;
  double pathloss_ref_db = 128.1;
  double pathloss_slope_db = 37.6;
};

// (D, epsilon, R_e^tar) tuple for the requirements sweep; the default four
// pair the parameter lists index-wise from loosest to strictest.
struct RequirementTuple {
  double latency_ms;
  double dep;
  double embb_rate_bps_hz;
  std::string label() const;
};

std::vector<RequirementTuple> default_requirement_tuples();

struct ExperimentSpec {
  std::string name = "default";
  ScenarioParams scenario;
  // training
  int episodes = 200, timeslots = 100, target_sync = 100;
  double eps_start = 1.0, eps_decay = 0.995, eps_floor = 0.01;
  double learning_rate = 1e-3, discount = 0.9, reward_scale = 1e-7;
  int batch = 48, replay_capacity = 10000;
  int levels = 4;
  // sweep
  std::string sweep_axis = "none";  // none | mmtc | requirements | levels | scheme
  std::vector<double> sweep_values;
  std::vector<RequirementTuple> requirement_tuples = default_requirement_tuples();
  int replications = 3;
  std::uint64_t base_seed = 1;
  std::vector<Scheme> schemes = {Scheme::FullMaql, Scheme::FullMad, Scheme::Homad};
  std::string out_dir = "results";
  int convergence_window = 10;
  double convergence_tol = 0.05;
  bool save_models = true;
};

// Flat dotted-key configuration text ("train.episodes = 200"). Unknown keys
// and malformed values raise std::runtime_error naming the offending field;
// an empty file yields the all-default spec.
ExperimentSpec parse_config(const std::string& text);
ExperimentSpec load_config(const std::string& path);
std::string format_config(const ExperimentSpec& spec);
void save_config(const ExperimentSpec& spec, const std::string& path);

// Instantiates the cell: K_U subchannels first, then K_E; users ordered
// URLLC, eMBB, mMTC with uniform-in-disk positions drawn from `seed`.
NetworkConfig build_network(const ScenarioParams& params, std::uint64_t seed);

struct ResultRow {
  std::string scenario;
  std::string scheme;
  std::string sweep_axis;
  std::string sweep_value;
  std::uint64_t seed = 0;
  double avg_ee = 0;  // final-window mean reward, bits/J
  int convergence_episode = 0;  // 0 when the detector found none
  int episodes_to_converge = 0;
  double violation_rate = 0;
  std::string status = "ok";
};

// One job per (scheme x sweep point x replication). Jobs run in parallel
// worker threads (SGNOMA_WORKERS, default hardware concurrency); outputs are
// deterministic for a fixed spec. Writes results.csv, per-run reward traces,
// serialized models, and a separate (non-deterministic) timings.csv.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, int workers = 0);

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);

struct RunTiming {
  std::string scheme;
  int convergence_episode = 0;
  double mean_episode_s = 0;
};

struct ConvergenceSummaryRow {
  std::string scheme;
  double avg_episode_s = 0;
  double episodes = 0;        // mean detected convergence episode
  double convergence_s = 0;   // product of the two
  int runs = 0;
};

// Groups per-run timings by scheme, mirroring the convergence-time table
// (avg. time per episode, no. of episodes, their product).
std::vector<ConvergenceSummaryRow> summarize_convergence(std::span<const RunTiming> runs);

// Convenience overload working straight off training logs.
ConvergenceSummaryRow summarize_scheme(const std::string& name,
                                       std::span<const TrainingLog* const> logs,
                                       int window = 10, double tol = 0.05);

std::string format_summary_table(std::span<const ConvergenceSummaryRow> rows);

int resolve_workers(int requested);

}  // namespace sgnoma
