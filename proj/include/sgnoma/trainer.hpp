#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgnoma/network.hpp"
#include "sgnoma/power_opt.hpp"
#include "sgnoma/rl_agents.hpp"
#include "sgnoma/system_model.hpp"

namespace sgnoma {

enum class Scheme { FullMaql, FullMad, Homad };

std::string to_string(Scheme s);
std::optional<Scheme> scheme_from_string(const std::string& name);

struct EpisodeConfig {
  int episodes = 200;       // E_p
  int timeslots = 100;      // T
  int target_sync = 100;    // B, TSs between target-network copies
  Scheme scheme = Scheme::Homad;
  std::uint64_t seed = 1;
  int levels = 4;           // L (FullMad / FullMaql)
  double eps_start = 1.0;
  double eps_decay = 0.995;  // per episode
  double eps_floor = 0.01;
  DqnConfig agent;
  QlConfig tabular;
  DinkelbachConfig power;
  StateCodec codec_template;  // subchannels/p_max filled in per run
  bool record_wall_time = true;
};

struct TimeslotOutcome {
  AllocationState state;
  ConstraintReport report;
  double reward = 0;  // zeta when the report is clean, else 0
  double zeta = 0;
  bool power_converged = true;  // false when the HOMAD inner solver gave up
};

// r(t) = zeta(t) if all constraints hold, 0 otherwise; every agent receives
// the same value.
double compute_reward(const ConstraintReport& report, double zeta);

// Applies each mMTC agent's (SC, TPL) choice; GB users transmit the minimum
// power meeting their target given the resulting interference, capped at
// their budget (a binding cap surfaces as a constraint violation).
TimeslotOutcome apply_actions_fullmad(const std::vector<DecodedAction>& mmtc_actions,
                                      const ChannelRealization& channels,
                                      const NetworkConfig& config,
                                      const std::vector<double>& levels_w);

// Applies each mMTC agent's SC choice and runs the Dinkelbach power
// allocation; an infeasible or non-converged solve yields reward 0.
TimeslotOutcome apply_actions_homad(const std::vector<int>& mmtc_sc_choice,
                                    const ChannelRealization& channels,
                                    const NetworkConfig& config,
                                    const DinkelbachConfig& cfg);

struct EpisodeStats {
  double mean_reward = 0;
  double mean_loss = 0;       // averaged over agents and trained TSs
  double violation_rate = 0;  // fraction of TSs with reward 0
  double mean_zeta = 0;
  double epsilon = 0;
};

struct TrainingLog {
  Scheme scheme = Scheme::Homad;
  std::vector<EpisodeStats> episodes;
  std::vector<double> episode_wall_s;  // measurement only, never in result CSVs
  long target_syncs = 0;
  long rejected_steps = 0;
  long power_failures = 0;  // HOMAD TSs where the inner solver did not converge
  long experiences_stored = 0;  // replay pushes (or tabular updates) across agents

  std::vector<double> episode_rewards() const;
};

struct TrainedModels {
  std::vector<Mlp> online;  // one per agent (DQN schemes)
};

// Algorithm main loop for all three schemes: per-TS state build, epsilon-
// greedy action selection, environment apply, shared-reward broadcast,
// replay/train, periodic target sync. Fully deterministic given the seed.
TrainingLog run_training(const NetworkConfig& config, const EpisodeConfig& cfg,
                         TrainedModels* models_out = nullptr);

// First episode index (1-based) after which the forward-looking windowed
// mean reward stays within tol of the final windowed mean; nullopt for an
// empty series.
std::optional<int> detect_convergence(std::span<const double> rewards,
                                      int window = 10, double tol = 0.05);

}  // namespace sgnoma
