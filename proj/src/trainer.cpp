#include "sgnoma/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "sgnoma/units.hpp"

namespace sgnoma {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::FullMaql: return "full-maql";
    case Scheme::FullMad: return "full-mad";
    case Scheme::Homad: return "homad";
  }
  return "?";
}

std::optional<Scheme> scheme_from_string(const std::string& name) {
  if (name == "full-maql" || name == "fullmaql" || name == "maql") return Scheme::FullMaql;
  if (name == "full-mad" || name == "fullmad" || name == "mad") return Scheme::FullMad;
  if (name == "homad") return Scheme::Homad;
  return std::nullopt;
}

double compute_reward(const ConstraintReport& report, double zeta) {
  return report.satisfied ? zeta : 0.0;
}

namespace {

// Minimum GB power meeting the per-SC SINR requirement given the current
// interference, proportionally scaled down if the budget binds (the rate
// constraint then fails and the TS earns no reward).
void set_gb_powers(AllocationState& state, const ChannelRealization& channels,
                   const NetworkConfig& config) {
  for (const auto& dev : config.users) {
    if (dev.service == ServiceClass::Mmtc) continue;
    const auto& grants = config.gb_grants.at(dev.id);
    if (grants.empty()) continue;
    std::vector<double> needed(grants.size(), 0.0);
    for (size_t j = 0; j < grants.size(); ++j) {
      const int sc = grants[j];
      // interference = received power of users decoded after this one; the
      // decode position depends on gains only, so add self before ordering
      auto occupants = state.users_on(sc);
      if (std::find(occupants.begin(), occupants.end(), dev.id) == occupants.end())
        occupants.push_back(dev.id);
      const auto order = decoding_order(occupants, config, channels, sc);
      double interf = 0;
      bool after = false;
      for (int u : order) {
        if (after) interf += state.power(u, sc) * channels.gain(u, sc);
        if (u == dev.id) after = true;
      }
      const double w = config.subchannels[sc].bandwidth_hz;
      const double sigma2 = config.noise_power_w(sc);
      double snr_req;
      if (dev.service == ServiceClass::Urllc) {
        snr_req = target_snr(dev.packet_bits, dev.latency_s, w, dev.dep);
      } else {
        // split the eMBB sum-rate target evenly across its granted SCs
        snr_req = std::exp2(dev.rate_target_bps / (grants.size() * w)) - 1.0;
      }
      needed[j] = snr_req * (interf + sigma2) / channels.gain(dev.id, sc);
    }
    double total = 0;
    for (double p : needed) total += p;
    const double scale = total > dev.max_power_w ? dev.max_power_w / total : 1.0;
    for (size_t j = 0; j < grants.size(); ++j)
      if (needed[j] > 0) state.assign(dev.id, grants[j], needed[j] * scale);
  }
}

TimeslotOutcome finish_outcome(AllocationState state, const ChannelRealization& channels,
                               const NetworkConfig& config) {
  TimeslotOutcome out;
  const auto metrics = compute_link_metrics(state, channels, config);
  out.report = check_constraints(state, metrics, config);
  out.zeta = ee_factor(state, metrics, config);
  out.reward = compute_reward(out.report, out.zeta);
  out.state = std::move(state);
  return out;
}

std::vector<int> mmtc_user_ids(const NetworkConfig& config) {
  return config.users_of(ServiceClass::Mmtc);
}

}  // namespace

TimeslotOutcome apply_actions_fullmad(const std::vector<DecodedAction>& mmtc_actions,
                                      const ChannelRealization& channels,
                                      const NetworkConfig& config,
                                      const std::vector<double>& levels_w) {
  const auto agents = mmtc_user_ids(config);
  if (mmtc_actions.size() != agents.size())
    throw std::invalid_argument("apply_actions_fullmad: one action per mMTC agent");
  auto state = AllocationState::zeros(config.num_users(), config.num_subchannels());
  for (size_t i = 0; i < agents.size(); ++i) {
    const auto& a = mmtc_actions[i];
    state.assign(agents[i], a.sc, levels_w.at(a.level));
  }
  set_gb_powers(state, channels, config);
  return finish_outcome(std::move(state), channels, config);
}

TimeslotOutcome apply_actions_homad(const std::vector<int>& mmtc_sc_choice,
                                    const ChannelRealization& channels,
                                    const NetworkConfig& config,
                                    const DinkelbachConfig& cfg) {
  const auto agents = mmtc_user_ids(config);
  if (mmtc_sc_choice.size() != agents.size())
    throw std::invalid_argument("apply_actions_homad: one SC index per mMTC agent");
  auto assignment = AllocationState::zeros(config.num_users(), config.num_subchannels());
  for (size_t i = 0; i < agents.size(); ++i)
    assignment.b[static_cast<size_t>(agents[i]) * config.num_subchannels() +
                 mmtc_sc_choice[i]] = 1;
  for (int u = 0; u < config.num_users(); ++u)
    for (int sc : config.gb_grants.at(u))
      assignment.b[static_cast<size_t>(u) * config.num_subchannels() + sc] = 1;

  const auto res = dinkelbach_allocate(assignment, channels, config, cfg);
  if (!res.feasible || !res.converged) {
    // zeroed powers violate the QoS constraints, so the reward contract
    // (reward > 0 iff clean) holds on this path too
    auto out = finish_outcome(
        AllocationState::zeros(config.num_users(), config.num_subchannels()), channels,
        config);
    out.power_converged = !res.feasible || res.converged;
    return out;
  }
  return finish_outcome(res.state, channels, config);
}

std::vector<double> TrainingLog::episode_rewards() const {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.mean_reward);
  return out;
}

TrainingLog run_training(const NetworkConfig& config_in, const EpisodeConfig& cfg,
                         TrainedModels* models_out) {
  NetworkConfig config = config_in;
  if (config.gb_grants.size() != config.users.size()) grant_gb_round_robin(config);

  const int k = config.num_subchannels();
  const auto agents = config.users_of(ServiceClass::Mmtc);
  const int n_agents = static_cast<int>(agents.size());
  if (n_agents == 0) throw std::invalid_argument("run_training: no mMTC agents");

  StateCodec codec = cfg.codec_template;
  codec.subchannels = k;
  codec.p_max_w = config.users[agents[0]].max_power_w;

  ActionSpace space;
  space.subchannels = k;
  space.levels = cfg.levels;
  space.mode = cfg.scheme == Scheme::Homad ? ActionSpace::Mode::Homad
                                           : ActionSpace::Mode::FullMad;

  DqnConfig agent_cfg = cfg.agent;
  std::vector<DqnAgent> dqn;
  std::vector<QTableAgent> tabular;
  if (cfg.scheme == Scheme::FullMaql) {
    // quartile bin edges from a warm-up draw of each agent's own gains
    Rng warmup(derive_seed(cfg.seed, 0xb125ULL));
    const int draws = 512;
    std::vector<std::vector<std::vector<double>>> samples(
        n_agents, std::vector<std::vector<double>>(k));
    for (int d = 0; d < draws; ++d) {
      const auto ch = generate_channels(config, warmup, d);
      for (int i = 0; i < n_agents; ++i)
        for (int s = 0; s < k; ++s)
          samples[i][s].push_back(linear_to_db(ch.gain(agents[i], s)));
    }
    for (int i = 0; i < n_agents; ++i) {
      std::vector<std::array<double, 3>> edges(k);
      for (int s = 0; s < k; ++s) {
        auto& v = samples[i][s];
        std::sort(v.begin(), v.end());
        edges[s] = {v[draws / 4], v[draws / 2], v[3 * draws / 4]};
      }
      tabular.emplace_back(std::move(edges), space, cfg.tabular,
                           derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i)));
    }
  } else {
    for (int i = 0; i < n_agents; ++i)
      dqn.emplace_back(codec.state_size(), space, agent_cfg,
                       derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(i)));
  }

  const auto levels_w = tpl_levels_w(codec.p_max_w, cfg.levels);
  Rng channel_rng(derive_seed(cfg.seed, 0xc4a2ULL));

  TrainingLog log;
  log.scheme = cfg.scheme;
  log.episodes.reserve(cfg.episodes);

  std::vector<std::vector<std::uint8_t>> prev_b(n_agents);
  std::vector<std::vector<double>> prev_p(n_agents);
  std::vector<int> prev_action(n_agents);
  long global_ts = 0;
  int t_index = 0;

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    const double eps =
        std::max(cfg.eps_floor, cfg.eps_start * std::pow(cfg.eps_decay, ep - 1));

    for (int i = 0; i < n_agents; ++i) {
      prev_b[i].assign(k, 0);
      prev_p[i].assign(k, 0.0);
      prev_action[i] = -1;
    }
    auto channels = generate_channels(config, channel_rng, t_index++);

    double reward_sum = 0, zeta_sum = 0, loss_sum = 0;
    long loss_count = 0;
    int violations = 0;

    for (int t = 1; t <= cfg.timeslots; ++t) {
      ++global_ts;
      std::vector<std::vector<double>> states(n_agents);
      std::vector<std::uint64_t> keys(n_agents);
      std::vector<int> actions(n_agents);
      std::vector<double> gains_row(k);
      for (int i = 0; i < n_agents; ++i) {
        for (int s = 0; s < k; ++s) gains_row[s] = channels.gain(agents[i], s);
        if (cfg.scheme == Scheme::FullMaql) {
          keys[i] = tabular[i].key_of(gains_row, prev_action[i]);
          actions[i] = tabular[i].act(keys[i], eps);
        } else {
          states[i] = codec.encode(gains_row, prev_b[i], prev_p[i]);
          actions[i] = dqn[i].act(states[i], eps);
        }
      }

      TimeslotOutcome outcome;
      if (cfg.scheme == Scheme::Homad) {
        std::vector<int> choices(n_agents);
        for (int i = 0; i < n_agents; ++i) choices[i] = decode_action(actions[i], space).sc;
        outcome = apply_actions_homad(choices, channels, config, cfg.power);
        if (!outcome.power_converged) ++log.power_failures;
      } else {
        std::vector<DecodedAction> decoded(n_agents);
        for (int i = 0; i < n_agents; ++i) decoded[i] = decode_action(actions[i], space);
        outcome = apply_actions_fullmad(decoded, channels, config, levels_w);
      }

      reward_sum += outcome.reward;
      zeta_sum += outcome.zeta;
      violations += outcome.reward > 0 ? 0 : 1;

      for (int i = 0; i < n_agents; ++i) {
        const auto a = decode_action(actions[i], space);
        for (int s = 0; s < k; ++s) {
          prev_b[i][s] = (s == a.sc) ? 1 : 0;
          prev_p[i][s] = outcome.state.power(agents[i], s);
        }
        prev_action[i] = actions[i];
      }

      auto next_channels = generate_channels(config, channel_rng, t_index++);
      for (int i = 0; i < n_agents; ++i) {
        if (cfg.scheme == Scheme::FullMaql) {
          std::vector<double> next_gains(k);
          for (int s = 0; s < k; ++s) next_gains[s] = next_channels.gain(agents[i], s);
          const auto next_key = tabular[i].key_of(next_gains, prev_action[i]);
          tabular[i].update(keys[i], actions[i], outcome.reward, next_key);
          ++log.experiences_stored;
        } else {
          Experience e;
          e.state = states[i];
          e.action = actions[i];
          e.reward = outcome.reward;
          std::vector<double> next_gains(k);
          for (int s = 0; s < k; ++s) next_gains[s] = next_channels.gain(agents[i], s);
          e.next_state = codec.encode(next_gains, prev_b[i], prev_p[i]);
          dqn[i].remember(std::move(e));
          ++log.experiences_stored;
          if (const auto loss = dqn[i].train_step()) {
            loss_sum += *loss;
            ++loss_count;
          }
          if (global_ts % cfg.target_sync == 0) dqn[i].sync_target();
        }
      }
      channels = std::move(next_channels);
    }

    EpisodeStats stats;
    stats.mean_reward = reward_sum / cfg.timeslots;
    stats.mean_zeta = zeta_sum / cfg.timeslots;
    stats.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    stats.violation_rate = static_cast<double>(violations) / cfg.timeslots;
    stats.epsilon = eps;
    log.episodes.push_back(stats);
    if (cfg.record_wall_time) {
      const auto t1 = std::chrono::steady_clock::now();
      log.episode_wall_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
  }

  for (auto& a : dqn) {
    log.target_syncs += a.sync_count();
    log.rejected_steps += a.rejected_steps();
  }
  if (models_out) {
    models_out->online.clear();
    for (const auto& a : dqn) models_out->online.push_back(a.online());
  }
  return log;
}

std::optional<int> detect_convergence(std::span<const double> rewards,
                                      int window, double tol) {
  if (rewards.empty()) return std::nullopt;
  const int n = static_cast<int>(rewards.size());
  const int w = std::min(window, n);
  const int n_windows = n - w + 1;
  std::vector<double> means(n_windows);
  double acc = 0;
  for (int i = 0; i < w; ++i) acc += rewards[i];
  means[0] = acc / w;
  for (int i = 1; i < n_windows; ++i) {
    acc += rewards[i + w - 1] - rewards[i - 1];
    means[i] = acc / w;
  }
  const double final_mean = means.back();
  const double band = tol * std::max(std::abs(final_mean), 1e-300);
  int first = n_windows - 1;
  for (int i = n_windows - 1; i >= 0; --i) {
    if (std::abs(means[i] - final_mean) <= band)
      first = i;
    else
      break;
  }
  return first + 1;  // 1-based episode index
}

}  // namespace sgnoma
