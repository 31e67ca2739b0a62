#pragma once

#include <span>
#include <vector>

#include "sgnoma/network.hpp"
#include "sgnoma/rng.hpp"

namespace sgnoma {

// SC bandwidth for numerology nu in {0..4}: 2^nu * 180 kHz.
// Throws std::out_of_range for other nu.
double bandwidth_of(int numerology);

// sigma^2 = F * N0 * W in watts (F in dB, N0 in dBm/Hz).
double noise_power(const NoiseModel& noise, double bandwidth_hz);

// Log-distance path loss, linear power gain.
double pathloss_db(const NetworkConfig& config, double distance_m);
double pathloss_linear(const NetworkConfig& config, double distance_m);

// Rician block fading, drawn independently per user-SC pair. Deterministic
// for a given rng state; the seeded overload derives a fresh stream from
// (seed, t) so repeated calls reproduce the same matrix.
ChannelRealization generate_channels(const NetworkConfig& config, Rng& rng, int t);
ChannelRealization generate_channels(const NetworkConfig& config, std::uint64_t seed, int t);

// SIC decoding order on one SC: the URLLC user (at most one GB user by C1)
// first, then eMBB/mMTC jointly by descending channel gain; gain ties break
// toward the lower user id. Throws std::invalid_argument if two GB users
// share the SC.
std::vector<int> decoding_order(const std::vector<int>& users_on_sc,
                                const NetworkConfig& config,
                                const ChannelRealization& channels, int sc);

// Per-user SINR down an ordered SIC chain; received powers y[i] = P_i * g_i
// follow the decode order. The last entry sees noise only.
std::vector<double> sinr_chain(std::span<const double> received_powers_w,
                               double noise_w);

// Finite-blocklength achievable rate (dispersion fixed at 1). May be
// negative; callers treat a negative value as an unmet demand.
double rate_urllc(double sinr, double bandwidth_hz, double latency_s, double dep);
double rate_mmtc(double sinr, double bandwidth_hz, double latency_s, double dep);

// Shannon rate for eMBB.
double rate_embb(double sinr, double bandwidth_hz);

// SNR threshold 2^{n/(D W) + Qinv(eps) / (ln2 sqrt(D W))} - 1.
double target_snr(double packet_bits, double latency_s, double bandwidth_hz, double dep);

// URLLC per-SC rate demand R_u^tar (evaluates to n/D under matched latency).
double urllc_rate_target(double packet_bits, double latency_s, double bandwidth_hz, double dep);

// Everything the per-TS evaluators need, computed once: decode orders,
// SINRs and achievable rates for each occupied user-SC pair.
struct LinkMetrics {
  std::vector<std::vector<int>> decode_order;  // per SC
  std::vector<double> sinr;                    // user x SC, 0 where b = 0
  std::vector<double> rate_bps;                // user x SC, 0 where b = 0
  int users = 0, subchannels = 0;
  double at_sinr(int u, int k) const { return sinr[static_cast<size_t>(u) * subchannels + k]; }
  double at_rate(int u, int k) const { return rate_bps[static_cast<size_t>(u) * subchannels + k]; }
};

LinkMetrics compute_link_metrics(const AllocationState& state,
                                 const ChannelRealization& channels,
                                 const NetworkConfig& config);

enum class Constraint {
  GbOrthogonality = 1,  // (C1) at most one GB user per SC
  MmtcSingleSc = 2,     // (C2) each mMTC user on exactly one SC
  UrllcRate = 3,        // (C3) URLLC per-SC rate demand
  EmbbRate = 4,         // (C4) eMBB sum-rate target
  MmtcSinr = 5,         // (C5) mMTC SINR threshold
  PowerBudget = 6,      // (C6) per-user power budget
};

struct ConstraintViolation {
  Constraint which;
  int user = -1;  // offending user, -1 when per-SC
  int sc = -1;    // offending SC, -1 when per-user
  double lhs = 0, rhs = 0;
};

struct ConstraintReport {
  bool satisfied = true;
  std::vector<ConstraintViolation> violations;
};

// Evaluates (C1)-(C6) for one TS. Violations are data, not errors; boundary
// equality counts as satisfied (comparisons carry a 1e-9 relative slack).
ConstraintReport check_constraints(const AllocationState& state,
                                   const ChannelRealization& channels,
                                   const NetworkConfig& config);
ConstraintReport check_constraints(const AllocationState& state,
                                   const LinkMetrics& metrics,
                                   const NetworkConfig& config);

// Total rate entering the EE factor: negative finite-blocklength rates clamp
// to zero, and an mMTC rate counts only while its SINR threshold holds.
double total_rate_bps(const AllocationState& state, const LinkMetrics& metrics,
                      const NetworkConfig& config);

// EE factor zeta = R^tot / (P^Tx + M P_c) in bits per joule.
double ee_factor(const AllocationState& state, const ChannelRealization& channels,
                 const NetworkConfig& config);
double ee_factor(const AllocationState& state, const LinkMetrics& metrics,
                 const NetworkConfig& config);

// lhs >= rhs up to 1e-9 relative slack; shared by constraint checks and the
// power optimizer so "meets the floor" means the same thing everywhere.
bool meets_ge(double lhs, double rhs);
bool meets_le(double lhs, double rhs);

}  // namespace sgnoma
