#include "sgnoma/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sgnoma/gaussian.hpp"
#include "sgnoma/units.hpp"

namespace sgnoma {

namespace {
constexpr double kRelSlack = 1e-9;
}

bool meets_ge(double lhs, double rhs) {
  return lhs >= rhs - kRelSlack * std::abs(rhs) - 1e-300;
}

bool meets_le(double lhs, double rhs) {
  return lhs <= rhs + kRelSlack * std::abs(rhs) + 1e-300;
}

double bandwidth_of(int numerology) {
  if (numerology < 0 || numerology > 4)
    throw std::out_of_range("bandwidth_of: numerology must be in {0..4}");
  return kBaseScBandwidthHz * static_cast<double>(1 << numerology);
}

double noise_power(const NoiseModel& noise, double bandwidth_hz) {
  if (!(bandwidth_hz > 0)) throw std::invalid_argument("noise_power: bandwidth must be positive");
  return db_to_linear(noise.figure_db) * dbm_to_watt(noise.psd_dbm_hz) * bandwidth_hz;
}

double pathloss_db(const NetworkConfig& config, double distance_m) {
  return config.pathloss_ref_db + config.pathloss_slope_db * std::log10(distance_m / 1000.0);
}

double pathloss_linear(const NetworkConfig& config, double distance_m) {
  return db_to_linear(-pathloss_db(config, distance_m));
}

ChannelRealization generate_channels(const NetworkConfig& config, Rng& rng, int t) {
  const int m = config.num_users();
  const int k = config.num_subchannels();
  auto out = ChannelRealization::zeros(m, k, t);
  const double kappa = db_to_linear(config.rician_k_db);
  const double los = std::sqrt(kappa / (kappa + 1.0));
  const double scatter = std::sqrt(1.0 / (2.0 * (kappa + 1.0)));
  for (int u = 0; u < m; ++u) {
    const double pl = pathloss_linear(config, config.users[u].distance_m());
    for (int s = 0; s < k; ++s) {
      const double re = los + scatter * rng.normal();
      const double im = scatter * rng.normal();
      out.gain(u, s) = pl * (re * re + im * im);
    }
  }
  return out;
}

ChannelRealization generate_channels(const NetworkConfig& config, std::uint64_t seed, int t) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t) + 0x6368616eULL));
  return generate_channels(config, rng, t);
}

std::vector<int> decoding_order(const std::vector<int>& users_on_sc,
                                const NetworkConfig& config,
                                const ChannelRealization& channels, int sc) {
  int gb_count = 0;
  int urllc_user = -1;
  std::vector<int> rest;
  for (int u : users_on_sc) {
    const auto svc = config.users.at(u).service;
    if (svc != ServiceClass::Mmtc) ++gb_count;
    if (svc == ServiceClass::Urllc)
      urllc_user = u;
    else
      rest.push_back(u);
  }
  if (gb_count > 1)
    throw std::invalid_argument("decoding_order: more than one GB user on SC (C1)");
  std::sort(rest.begin(), rest.end(), [&](int a, int b) {
    const double ga = channels.gain(a, sc), gb = channels.gain(b, sc);
    if (ga != gb) return ga > gb;
    return a < b;
  });
  std::vector<int> order;
  if (urllc_user >= 0) order.push_back(urllc_user);
  order.insert(order.end(), rest.begin(), rest.end());
  return order;
}

std::vector<double> sinr_chain(std::span<const double> received_powers_w, double noise_w) {
  if (!(noise_w > 0)) throw std::invalid_argument("sinr_chain: noise power must be positive");
  const size_t n = received_powers_w.size();
  std::vector<double> out(n, 0.0);
  // suffix sums: user at position l is interfered by positions > l only
  double interf = 0;
  for (size_t i = n; i-- > 0;) {
    out[i] = received_powers_w[i] / (interf + noise_w);
    interf += received_powers_w[i];
  }
  return out;
}

namespace {

double fb_penalty(double bandwidth_hz, double latency_s, double dep) {
  // dispersion V ~ 1
  return std::sqrt(1.0 / (latency_s * bandwidth_hz)) * inverse_q(dep) / kLn2;
}

}  // namespace

double rate_urllc(double sinr, double bandwidth_hz, double latency_s, double dep) {
  return bandwidth_hz * (std::log2(1.0 + sinr) - fb_penalty(bandwidth_hz, latency_s, dep));
}

double rate_mmtc(double sinr, double bandwidth_hz, double latency_s, double dep) {
  return rate_urllc(sinr, bandwidth_hz, latency_s, dep);
}

double rate_embb(double sinr, double bandwidth_hz) {
  return bandwidth_hz * std::log2(1.0 + sinr);
}

double target_snr(double packet_bits, double latency_s, double bandwidth_hz, double dep) {
  const double exponent = packet_bits / (latency_s * bandwidth_hz) +
                          inverse_q(dep) / (kLn2 * std::sqrt(latency_s * bandwidth_hz));
  return std::exp2(exponent) - 1.0;
}

double urllc_rate_target(double packet_bits, double latency_s, double bandwidth_hz, double dep) {
  const double gamma_tar = target_snr(packet_bits, latency_s, bandwidth_hz, dep);
  return bandwidth_hz *
         (std::log2(1.0 + gamma_tar) - fb_penalty(bandwidth_hz, latency_s, dep));
}

LinkMetrics compute_link_metrics(const AllocationState& state,
                                 const ChannelRealization& channels,
                                 const NetworkConfig& config) {
  const int k = config.num_subchannels();
  LinkMetrics m;
  m.users = state.users;
  m.subchannels = k;
  m.decode_order.resize(k);
  m.sinr.assign(static_cast<size_t>(state.users) * k, 0.0);
  m.rate_bps.assign(static_cast<size_t>(state.users) * k, 0.0);
  for (int sc = 0; sc < k; ++sc) {
    const auto occupants = state.users_on(sc);
    if (occupants.empty()) continue;
    const auto order = decoding_order(occupants, config, channels, sc);
    std::vector<double> received(order.size());
    for (size_t i = 0; i < order.size(); ++i)
      received[i] = state.power(order[i], sc) * channels.gain(order[i], sc);
    const auto gammas = sinr_chain(received, config.noise_power_w(sc));
    const auto& sch = config.subchannels[sc];
    for (size_t i = 0; i < order.size(); ++i) {
      const int u = order[i];
      const auto& dev = config.users[u];
      const size_t at = static_cast<size_t>(u) * k + sc;
      m.sinr[at] = gammas[i];
      switch (dev.service) {
        case ServiceClass::Urllc:
          m.rate_bps[at] = rate_urllc(gammas[i], sch.bandwidth_hz, dev.latency_s, dev.dep);
          break;
        case ServiceClass::Embb:
          m.rate_bps[at] = rate_embb(gammas[i], sch.bandwidth_hz);
          break;
        case ServiceClass::Mmtc:
          m.rate_bps[at] = rate_mmtc(gammas[i], sch.bandwidth_hz, dev.latency_s, dev.dep);
          break;
      }
    }
    m.decode_order[sc] = order;
  }
  return m;
}

ConstraintReport check_constraints(const AllocationState& state,
                                   const ChannelRealization& channels,
                                   const NetworkConfig& config) {
  return check_constraints(state, compute_link_metrics(state, channels, config), config);
}

ConstraintReport check_constraints(const AllocationState& state,
                                   const LinkMetrics& metrics,
                                   const NetworkConfig& config) {
  ConstraintReport report;
  auto flag = [&](Constraint c, int user, int sc, double lhs, double rhs) {
    report.satisfied = false;
    report.violations.push_back({c, user, sc, lhs, rhs});
  };

  const int k = config.num_subchannels();
  // (C1) orthogonal GB scheduling
  for (int sc = 0; sc < k; ++sc) {
    int gb = 0;
    for (int u : state.users_on(sc))
      gb += (config.users[u].service != ServiceClass::Mmtc);
    if (gb > 1) flag(Constraint::GbOrthogonality, -1, sc, gb, 1);
  }
  for (const auto& dev : config.users) {
    const auto occupied = state.subchannels_of(dev.id);
    switch (dev.service) {
      case ServiceClass::Mmtc: {
        // (C2) exactly one SC
        if (occupied.size() != 1)
          flag(Constraint::MmtcSingleSc, dev.id, -1, static_cast<double>(occupied.size()), 1);
        // (C5) SINR threshold on the selected SC; unassigned counts as unmet
        if (occupied.empty()) {
          flag(Constraint::MmtcSinr, dev.id, -1, 0, 1);
        } else {
          for (int sc : occupied) {
            const double thr = target_snr(dev.packet_bits, dev.latency_s,
                                          config.subchannels[sc].bandwidth_hz, dev.dep);
            if (!meets_ge(metrics.at_sinr(dev.id, sc), thr))
              flag(Constraint::MmtcSinr, dev.id, sc, metrics.at_sinr(dev.id, sc), thr);
          }
        }
        break;
      }
      case ServiceClass::Urllc: {
        // (C3) per-SC rate demand; a user with no SC cannot meet it
        if (occupied.empty()) {
          const double demand = dev.packet_bits / dev.latency_s;
          flag(Constraint::UrllcRate, dev.id, -1, 0, demand);
        } else {
          for (int sc : occupied) {
            const double demand =
                urllc_rate_target(dev.packet_bits, dev.latency_s,
                                  config.subchannels[sc].bandwidth_hz, dev.dep);
            if (!meets_ge(metrics.at_rate(dev.id, sc), demand))
              flag(Constraint::UrllcRate, dev.id, sc, metrics.at_rate(dev.id, sc), demand);
          }
        }
        break;
      }
      case ServiceClass::Embb: {
        // (C4) sum rate across granted SCs
        double sum = 0;
        for (int sc : occupied) sum += metrics.at_rate(dev.id, sc);
        if (!meets_ge(sum, dev.rate_target_bps))
          flag(Constraint::EmbbRate, dev.id, -1, sum, dev.rate_target_bps);
        break;
      }
    }
    // (C6) power budget
    const double used = state.total_power(dev.id);
    if (!meets_le(used, dev.max_power_w))
      flag(Constraint::PowerBudget, dev.id, -1, used, dev.max_power_w);
  }
  return report;
}

double total_rate_bps(const AllocationState& state, const LinkMetrics& metrics,
                      const NetworkConfig& config) {
  double total = 0;
  for (int u = 0; u < state.users; ++u) {
    const auto& dev = config.users[u];
    for (int sc = 0; sc < state.subchannels; ++sc) {
      if (!state.occupied(u, sc)) continue;
      double r = metrics.at_rate(u, sc);
      if (dev.service == ServiceClass::Mmtc) {
        const double thr = target_snr(dev.packet_bits, dev.latency_s,
                                      config.subchannels[sc].bandwidth_hz, dev.dep);
        if (!meets_ge(metrics.at_sinr(u, sc), thr)) r = 0;
      }
      total += std::max(r, 0.0);
    }
  }
  return total;
}

double ee_factor(const AllocationState& state, const LinkMetrics& metrics,
                 const NetworkConfig& config) {
  const double denom =
      state.total_power() + config.num_users() * config.noise.circuit_power_w;
  return total_rate_bps(state, metrics, config) / denom;
}

double ee_factor(const AllocationState& state, const ChannelRealization& channels,
                 const NetworkConfig& config) {
  return ee_factor(state, compute_link_metrics(state, channels, config), config);
}

}  // namespace sgnoma
