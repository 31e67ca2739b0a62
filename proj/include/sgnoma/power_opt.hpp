#pragma once

#include <span>
#include <vector>

#include "sgnoma/network.hpp"
#include "sgnoma/system_model.hpp"

namespace sgnoma {

// Effective gain A = g / (interference-from-later-decoded + sigma^2), 1/W.
// Valid only while the powers of all later-decoded users stay fixed.
inline double effective_gain(double gain, double later_interference_w, double noise_w) {
  return gain / (later_interference_w + noise_w);
}

struct DualConfig {
  int max_iters = 5000;      // subgradient iteration cap
  int polish_after = 200;    // switch to water-level bisection past this
  double rate_tol_rel = 1e-4;
  double power_tol_rel = 1e-4;
  double cs_tol = 1e-3;      // normalized complementary-slackness residual
};

struct MmtcPowerResult {
  double power_w = 0;
  bool feasible = false;  // false when the SINR floor exceeds the budget
};

// Closed-form EE power for one mMTC user given its effective gain:
// min(max(W/(zeta ln2) - 1/A, gamma_tar/A), P_max). zeta = 0 degenerates to
// the P_max clamp.
MmtcPowerResult optimize_mmtc_power(double a_eff, double snr_floor, double p_max_w,
                                    double zeta, double bandwidth_hz);

struct DualResult {
  std::vector<double> powers_w;
  double mu = 0;     // rate-constraint multiplier (eMBB)
  double nu = 0;     // power-budget multiplier (eMBB)
  double theta = 0;  // power-budget multiplier (URLLC)
  int iters = 0;     // subgradient iterations consumed
  bool feasible = false;
  bool converged = false;
  double cs_rate = 0, cs_power = 0;  // normalized CS residuals at the solution
  double objective = 0;              // sum rate - zeta * sum power
};

// eMBB power across its granted SCs: maximize sum C_j - zeta p_j subject to
// sum C_j >= rate_target and sum p_j <= p_max. Projected-subgradient updates
// of (mu, nu) with step step0/v; if those have not met tolerance after
// polish_after iterations, the binding water level is pinned by bisection.
DualResult optimize_embb_power(std::span<const double> a_eff, double rate_target_bps,
                               double p_max_w, double zeta, double bandwidth_hz,
                               const DualConfig& cfg = {});

// URLLC power across its granted SCs: per-SC floor gamma_tar/A_j enforced
// exactly, budget met through the theta multiplier.
DualResult optimize_urllc_power(std::span<const double> a_eff, double snr_floor,
                                double p_max_w, double zeta, double bandwidth_hz,
                                double latency_s, double dep,
                                const DualConfig& cfg = {});

// Dinkelbach surrogate R^tot - zeta * P^Tx in bits/s.
double subtractive_objective(const AllocationState& state,
                             const ChannelRealization& channels,
                             const NetworkConfig& config, double zeta);

struct DinkelbachConfig {
  double tol_rel = 1e-6;  // |zeta_q - zeta_{q-1}| <= tol_rel * zeta scale
  int max_outer = 200;
  DualConfig dual;
};

struct DinkelbachResult {
  AllocationState state;
  double zeta = 0;                  // last EE parameter
  std::vector<double> zeta_trace;   // zeta^(1), zeta^(2), ...
  int iterations = 0;
  bool feasible = false;
  bool converged = false;
};

// Algorithm: from zeta = 0, repeatedly solve powers per SC in reverse
// decoding order (mMTC closed forms, then eMBB/URLLC duals once every user
// decoded after them is fixed) and update zeta = R^tot / (P^Tx + M P_c).
// `assignment` supplies the SC occupancy; it must satisfy (C1) and (C2).
// Non-convergence returns converged = false carrying the last zeta.
DinkelbachResult dinkelbach_allocate(const AllocationState& assignment,
                                     const ChannelRealization& channels,
                                     const NetworkConfig& config,
                                     const DinkelbachConfig& cfg = {});

}  // namespace sgnoma
