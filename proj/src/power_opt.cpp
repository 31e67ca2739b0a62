#include "sgnoma/power_opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgnoma/units.hpp"

namespace sgnoma {

namespace {

constexpr double kTinyZeta = 1e-30;

// Powers on the waterfilling manifold p_j = max(wl - 1/A_j, floor_j).
std::vector<double> powers_at_level(std::span<const double> a_eff,
                                    std::span<const double> floors, double wl) {
  std::vector<double> p(a_eff.size());
  for (size_t j = 0; j < a_eff.size(); ++j)
    p[j] = std::max(wl - 1.0 / a_eff[j], floors[j]);
  return p;
}

double sum_power(std::span<const double> p) {
  double s = 0;
  for (double v : p) s += v;
  return s;
}

double sum_shannon(std::span<const double> a_eff, std::span<const double> p, double w) {
  double s = 0;
  for (size_t j = 0; j < p.size(); ++j) s += rate_embb(a_eff[j] * p[j], w);
  return s;
}

// Smallest wl with f(wl) >= target, f monotone non-decreasing.
template <typename F>
double bisect_level(F f, double target, double lo, double hi) {
  for (int i = 0; i < 400 && f(hi) < target; ++i) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

MmtcPowerResult optimize_mmtc_power(double a_eff, double snr_floor, double p_max_w,
                                    double zeta, double bandwidth_hz) {
  if (!(a_eff > 0) || !(p_max_w > 0))
    throw std::invalid_argument("optimize_mmtc_power: A and P_max must be positive");
  const double floor = snr_floor / a_eff;
  if (!meets_le(floor, p_max_w)) return {0.0, false};
  const double stationary = zeta > kTinyZeta
                                ? bandwidth_hz / (zeta * kLn2) - 1.0 / a_eff
                                : std::numeric_limits<double>::infinity();
  const double p = std::min(std::max(stationary, floor), p_max_w);
  return {p, true};
}

DualResult optimize_embb_power(std::span<const double> a_eff, double rate_target_bps,
                               double p_max_w, double zeta, double bandwidth_hz,
                               const DualConfig& cfg) {
  const size_t n = a_eff.size();
  if (n == 0) throw std::invalid_argument("optimize_embb_power: no subchannels");
  for (double a : a_eff)
    if (!(a > 0)) throw std::invalid_argument("optimize_embb_power: A must be positive");

  DualResult out;
  const std::vector<double> zero_floors(n, 0.0);
  const double w = bandwidth_hz;
  const double min_inv_a = 1.0 / *std::max_element(a_eff.begin(), a_eff.end());
  auto power_at = [&](double wl) {
    return sum_power(powers_at_level(a_eff, zero_floors, wl));
  };
  auto rate_at = [&](double wl) {
    return sum_shannon(a_eff, powers_at_level(a_eff, zero_floors, wl), w);
  };

  // Feasibility: the rate achievable with the whole budget waterfilled.
  const double wl_budget = bisect_level(power_at, p_max_w, min_inv_a, min_inv_a + p_max_w);
  const double rate_cap = rate_at(wl_budget);
  if (!meets_ge(rate_cap, rate_target_bps)) return out;  // infeasible
  out.feasible = true;

  const double tol_r = cfg.rate_tol_rel * std::max(rate_target_bps, 1.0);
  const double tol_p = cfg.power_tol_rel * p_max_w;
  const double nu_scale = std::max(zeta, w / (p_max_w * kLn2));

  auto finish = [&](double mu, double nu, std::vector<double> p, int iters, bool conv) {
    out.mu = mu;
    out.nu = nu;
    out.iters = iters;
    out.converged = conv;
    const double rate = sum_shannon(a_eff, p, w);
    const double pow_sum = sum_power(p);
    out.cs_rate = std::abs(mu * (rate_target_bps - rate)) / std::max(rate_target_bps, 1.0);
    out.cs_power = std::abs(nu * (pow_sum - p_max_w)) / std::max(nu_scale * p_max_w, 1e-300);
    out.objective = rate - zeta * pow_sum;
    out.powers_w = std::move(p);
  };

  // Projected subgradient on (mu, nu), step delta0 / v, residuals normalized
  // so one delta0 fits every instance scale.
  double mu = 0, nu = 0;
  int v = 1;
  for (; v <= std::min(cfg.max_iters, cfg.polish_after); ++v) {
    const double denom = (nu + zeta) * kLn2;
    const double wl = denom > kTinyZeta * w ? (1.0 + mu) * w / denom : 1e300;
    auto p = powers_at_level(a_eff, zero_floors, std::min(wl, min_inv_a + p_max_w * 2));
    for (auto& pj : p) pj = std::min(pj, p_max_w);  // keep finite under nu = zeta = 0
    const double rate = sum_shannon(a_eff, p, w);
    const double pow_sum = sum_power(p);
    const bool primal_ok = rate >= rate_target_bps - tol_r && pow_sum <= p_max_w + tol_p;
    const double cs_mu = std::abs(mu * (rate_target_bps - rate)) / std::max(rate_target_bps, 1.0);
    const double cs_nu = std::abs(nu * (pow_sum - p_max_w)) / std::max(nu_scale * p_max_w, 1e-300);
    if (primal_ok && cs_mu < cfg.cs_tol && cs_nu < cfg.cs_tol) {
      finish(mu, nu, std::move(p), v, true);
      return out;
    }
    const double delta = 1.0 / v;
    mu = std::max(0.0, mu - delta * (rate - rate_target_bps) / std::max(rate_target_bps, 1.0));
    nu = std::max(0.0, nu + delta * nu_scale * (pow_sum - p_max_w) / p_max_w);
  }

  // Subgradient has not settled: pin the binding water level exactly.
  // p(mu, nu) depends on the multipliers only through
  // wl = (1+mu) W / ((nu+zeta) ln2), and both sum-power and sum-rate are
  // monotone in wl, so each KKT case reduces to one bisection.
  const double wl_free =
      zeta > kTinyZeta ? w / (zeta * kLn2) : std::numeric_limits<double>::infinity();
  if (std::isfinite(wl_free) && power_at(wl_free) <= p_max_w &&
      meets_ge(rate_at(wl_free), rate_target_bps)) {
    finish(0.0, 0.0, powers_at_level(a_eff, zero_floors, wl_free), v - 1, true);
    return out;
  }
  if (!std::isfinite(wl_free) || power_at(wl_free) > p_max_w) {
    // budget binds; feasibility was checked against this very level
    const double nu_star = std::max(w / (wl_budget * kLn2) - zeta, 0.0);
    finish(0.0, nu_star, powers_at_level(a_eff, zero_floors, wl_budget), v - 1, true);
    return out;
  }
  // rate binds
  const double wl_rate =
      bisect_level(rate_at, rate_target_bps, min_inv_a, min_inv_a + p_max_w);
  const double mu_star = std::max(wl_rate * zeta * kLn2 / w - 1.0, 0.0);
  finish(mu_star, 0.0, powers_at_level(a_eff, zero_floors, wl_rate), v - 1, true);
  return out;
}

DualResult optimize_urllc_power(std::span<const double> a_eff, double snr_floor,
                                double p_max_w, double zeta, double bandwidth_hz,
                                double latency_s, double dep, const DualConfig& cfg) {
  const size_t n = a_eff.size();
  if (n == 0) throw std::invalid_argument("optimize_urllc_power: no subchannels");
  for (double a : a_eff)
    if (!(a > 0)) throw std::invalid_argument("optimize_urllc_power: A must be positive");

  DualResult out;
  const double w = bandwidth_hz;
  std::vector<double> floors(n);
  for (size_t j = 0; j < n; ++j) floors[j] = snr_floor / a_eff[j];
  const double floor_sum = sum_power(floors);
  if (!meets_le(floor_sum, p_max_w)) return out;  // infeasible
  out.feasible = true;

  auto rate_sum = [&](std::span<const double> p) {
    double s = 0;
    for (size_t j = 0; j < n; ++j)
      s += rate_urllc(a_eff[j] * p[j], w, latency_s, dep);
    return s;
  };
  auto finish = [&](double theta, std::vector<double> p, int iters, bool conv) {
    out.theta = theta;
    out.iters = iters;
    out.converged = conv;
    const double pow_sum = sum_power(p);
    const double theta_scale = std::max(zeta, w / (p_max_w * kLn2));
    out.cs_power = std::abs(theta * (pow_sum - p_max_w)) / std::max(theta_scale * p_max_w, 1e-300);
    out.cs_rate = 0;
    out.objective = rate_sum(p) - zeta * pow_sum;
    out.powers_w = std::move(p);
  };

  const double tol_p = cfg.power_tol_rel * p_max_w;
  const double theta_scale = std::max(zeta, w / (p_max_w * kLn2));
  double theta = 0;
  int v = 1;
  for (; v <= std::min(cfg.max_iters, cfg.polish_after); ++v) {
    const double denom = (theta + zeta) * kLn2;
    const double wl = denom > kTinyZeta * w ? w / denom : 1e300;
    auto p = powers_at_level(a_eff, floors, wl);
    for (size_t j = 0; j < n; ++j) p[j] = std::min(p[j], std::max(floors[j], p_max_w));
    const double pow_sum = sum_power(p);
    const double cs = std::abs(theta * (pow_sum - p_max_w)) / std::max(theta_scale * p_max_w, 1e-300);
    if (pow_sum <= p_max_w + tol_p && cs < cfg.cs_tol) {
      finish(theta, std::move(p), v, true);
      return out;
    }
    theta = std::max(0.0, theta + (theta_scale / v) * (pow_sum - p_max_w) / p_max_w);
  }

  // Pin the budget-binding water level by bisection (sum power is monotone
  // non-decreasing in wl and equals floor_sum as wl -> 0).
  auto power_at = [&](double wl) { return sum_power(powers_at_level(a_eff, floors, wl)); };
  const double wl_free =
      zeta > kTinyZeta ? w / (zeta * kLn2) : std::numeric_limits<double>::infinity();
  if (std::isfinite(wl_free) && power_at(wl_free) <= p_max_w) {
    finish(0.0, powers_at_level(a_eff, floors, wl_free), v - 1, true);
    return out;
  }
  const double min_inv_a = 1.0 / *std::max_element(a_eff.begin(), a_eff.end());
  const double wl_budget = bisect_level(power_at, p_max_w, 0.0, min_inv_a + p_max_w);
  const double theta_star = std::max(w / (wl_budget * kLn2) - zeta, 0.0);
  finish(theta_star, powers_at_level(a_eff, floors, wl_budget), v - 1, true);
  return out;
}

double subtractive_objective(const AllocationState& state,
                             const ChannelRealization& channels,
                             const NetworkConfig& config, double zeta) {
  const auto metrics = compute_link_metrics(state, channels, config);
  return total_rate_bps(state, metrics, config) - zeta * state.total_power();
}

namespace {

constexpr int kMaxPerSc = 64;

// Per-TS solver shared by the sweep and the refinement passes. The pure
// sequential sweep maximizes each user's own R - zeta p given later-decoded
// powers (Remark-1 direction), which leaves the interference it casts on
// earlier-decoded users unpriced; refinement therefore walks every
// transmitting (user, SC) slot through exact 1-D searches of the full
// subtractive objective: a plain move (others fixed), a floor-tracking move
// (earlier floor-bound users follow their floors as the slot power varies),
// and a per-SC joint scaling move.
class InnerSolver {
 public:
  InnerSolver(const AllocationState& assignment, const ChannelRealization& channels,
              const NetworkConfig& config, const DualConfig& dual)
      : b_(assignment), ch_(channels), cfg_(config), dual_(dual),
        k_(config.num_subchannels()) {
    user_scs_.resize(assignment.users);
    for (int u = 0; u < assignment.users; ++u)
      user_scs_[u] = assignment.subchannels_of(u);
    sc_.resize(k_);
    for (int sc = 0; sc < k_; ++sc) {
      auto& d = sc_[sc];
      d.users = decoding_order(b_.users_on(sc), cfg_, ch_, sc);
      if (d.users.size() > kMaxPerSc)
        throw std::invalid_argument("dinkelbach: too many users on one SC");
      d.w = cfg_.subchannels[sc].bandwidth_hz;
      d.sigma2 = cfg_.noise_power_w(sc);
      for (int u : d.users) {
        const auto& dev = cfg_.users[u];
        d.gain.push_back(ch_.gain(u, sc));
        d.svc.push_back(static_cast<int>(dev.service));
        d.snr_floor.push_back(dev.service == ServiceClass::Embb
                                  ? 0.0
                                  : target_snr(dev.packet_bits, dev.latency_s, d.w,
                                               dev.dep));
      }
    }
  }

  // Minimum-power feasibility stack: every user at exactly its requirement
  // given the later-decoded powers. Floors only grow with interference, so
  // failure of this minimal point certifies infeasibility of the assignment.
  bool minimal_stack(AllocationState& out) const { return sweep(out, 0.0, true); }

  bool sequential_sweep(AllocationState& out, double zeta) const {
    return sweep(out, zeta, false);
  }

  // True subtractive objective R^tot - zeta P^Tx at a candidate state.
  double objective(const AllocationState& st, double zeta) const {
    double total = 0;
    for (int sc = 0; sc < k_; ++sc)
      total += prefix_rate(st, sc, sc_[sc].users.size());
    return total - zeta * st.total_power();
  }

  bool feasible(const AllocationState& st) const {
    for (int sc = 0; sc < k_; ++sc) {
      const auto& d = sc_[sc];
      double interf = 0;
      for (size_t i = d.users.size(); i-- > 0;) {
        const double y = st.power(d.users[i], sc) * d.gain[i];
        if (d.snr_floor[i] > 0 && !meets_ge(y / (interf + d.sigma2), d.snr_floor[i]))
          return false;
        interf += y;
      }
    }
    for (const auto& dev : cfg_.users) {
      if (!meets_le(st.total_power(dev.id), dev.max_power_w)) return false;
      if (dev.service == ServiceClass::Embb) {
        double sum = 0;
        for (int sc : user_scs_[dev.id]) sum += user_rate(st, dev.id, sc);
        if (!meets_ge(sum, dev.rate_target_bps)) return false;
      }
    }
    return true;
  }

  void refine(AllocationState& st, double zeta, int max_passes = 8) const {
    double current = objective(st, zeta);
    for (int pass = 0; pass < max_passes; ++pass) {
      const double before = current;
      for (int sc = 0; sc < k_; ++sc) {
        const auto& d = sc_[sc];
        for (size_t pos = d.users.size(); pos-- > 0;) {
          current = plain_move(st, sc, static_cast<int>(pos), zeta, current);
          if (pos > 0)
            current = tracked_move(st, sc, static_cast<int>(pos), zeta, current);
        }
        current = scale_move(st, sc, zeta, current);
      }
      if (current - before <= 1e-9 * (std::abs(before) + 1.0)) break;
    }
  }

 private:
  struct ScData {
    std::vector<int> users;        // decode order, position 0 decoded first
    std::vector<double> gain;
    std::vector<double> snr_floor; // 0 for eMBB (rate target handled separately)
    std::vector<int> svc;  // cast of ServiceClass
    double w = 0, sigma2 = 0;
  };

  double power_at(const AllocationState& st, int sc, size_t pos) const {
    return st.power(sc_[sc].users[pos], sc);
  }

  // sum of achievable (clamped) rates of decode positions < upto on sc
  double prefix_rate(const AllocationState& st, int sc, size_t upto) const {
    const auto& d = sc_[sc];
    const size_t n = d.users.size();
    double y[kMaxPerSc];
    for (size_t i = 0; i < n; ++i) y[i] = power_at(st, sc, i) * d.gain[i];
    double interf = 0, total = 0;
    for (size_t i = n; i-- > 0;) {
      const double gamma = y[i] / (interf + d.sigma2);
      interf += y[i];
      if (i >= upto) continue;
      total += std::max(position_rate(sc, i, gamma), 0.0);
    }
    return total;
  }

  double position_rate(int sc, size_t pos, double gamma) const {
    const auto& d = sc_[sc];
    const auto& dev = cfg_.users[d.users[pos]];
    switch (dev.service) {
      case ServiceClass::Urllc: return rate_urllc(gamma, d.w, dev.latency_s, dev.dep);
      case ServiceClass::Embb: return rate_embb(gamma, d.w);
      default: return rate_mmtc(gamma, d.w, dev.latency_s, dev.dep);
    }
  }

  double user_rate(const AllocationState& st, int user, int sc) const {
    const auto& d = sc_[sc];
    double interf = 0, gamma = 0;
    for (size_t i = d.users.size(); i-- > 0;) {
      const double y = power_at(st, sc, i) * d.gain[i];
      gamma = y / (interf + d.sigma2);
      interf += y;
      if (d.users[i] == user) return position_rate(sc, i, gamma);
    }
    return 0;
  }

  double interference_below(const AllocationState& st, int sc, int pos) const {
    const auto& d = sc_[sc];
    double interf = 0;
    for (size_t i = pos + 1; i < d.users.size(); ++i)
      interf += power_at(st, sc, i) * d.gain[i];
    return interf;
  }

  // per-SC SINR requirement at a position: the hard floor for URLLC/mMTC, or
  // the residual-target SNR for eMBB given its rates on other SCs
  double position_snr_req(const AllocationState& st, int sc, int pos) const {
    const auto& d = sc_[sc];
    if (d.snr_floor[pos] > 0) return d.snr_floor[pos];
    const int u = d.users[pos];
    const auto& dev = cfg_.users[u];
    double other = 0;
    for (int osc : user_scs_[u])
      if (osc != sc) other += user_rate(st, u, osc);
    return std::exp2(std::max(dev.rate_target_bps - other, 0.0) / d.w) - 1.0;
  }

  // requirement-only power at a position given the current state below it
  double min_power_at(const AllocationState& st, int sc, int pos) const {
    const double denom = interference_below(st, sc, pos) + sc_[sc].sigma2;
    return position_snr_req(st, sc, pos) * denom / sc_[sc].gain[pos];
  }

  // Largest slot power before some earlier-decoded user's requirement breaks
  // at its current power.
  double protection_cap(const AllocationState& st, int sc, int pos) const {
    const auto& d = sc_[sc];
    double cap = std::numeric_limits<double>::infinity();
    for (int j = 0; j < pos; ++j) {
      const double snr_req = position_snr_req(st, sc, j);
      if (snr_req <= 0) continue;
      double other_interf = 0;
      for (size_t i = j + 1; i < d.users.size(); ++i)
        if (static_cast<int>(i) != pos) other_interf += power_at(st, sc, i) * d.gain[i];
      const double y_j = power_at(st, sc, j) * d.gain[j];
      const double room = y_j / snr_req - d.sigma2 - other_interf;
      cap = std::min(cap, room / d.gain[pos]);
    }
    return cap;
  }

  struct LineSearch {
    double best_p = 0, best_val = -1e300;
  };

  template <typename Eval>
  static LineSearch line_max(Eval&& eval, double lo, double hi, double p_now,
                             double val_now) {
    LineSearch ls;
    ls.best_p = p_now;
    ls.best_val = val_now;
    auto consider = [&](double p) {
      const double v = eval(p);
      if (v > ls.best_val) {
        ls.best_val = v;
        ls.best_p = p;
      }
    };
    const int scan = 16;
    for (int i = 0; i <= scan; ++i) consider(lo + (hi - lo) * i / scan);
    double a = std::max(lo, ls.best_p - (hi - lo) / scan);
    double b = std::min(hi, ls.best_p + (hi - lo) / scan);
    for (int it = 0; it < 50 && b - a > 1e-15 + 1e-12 * b; ++it) {
      const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
      if (eval(m1) < eval(m2)) a = m1; else b = m2;
    }
    consider(0.5 * (a + b));
    return ls;
  }

  // 1-D search over the slot power with every other power fixed
  double plain_move(AllocationState& st, int sc, int pos, double zeta,
                    double current) const {
    const auto& d = sc_[sc];
    const int u = d.users[pos];
    const double p_now = st.power(u, sc);
    if (!(p_now > 0)) return current;
    const double lo = min_power_at(st, sc, pos);
    double hi = cfg_.users[u].max_power_w - (st.total_power(u) - p_now);
    hi = std::min(hi, protection_cap(st, sc, pos));
    if (!(hi > 0) || lo > hi) return current;

    const double rest = current - (prefix_rate(st, sc, pos + 1) - zeta * st.total_power());
    auto eval = [&](double p) {
      st.p[static_cast<size_t>(u) * k_ + sc] = p;
      return prefix_rate(st, sc, pos + 1) - zeta * st.total_power();
    };
    const auto ls = line_max(eval, lo, hi, p_now, current - rest);
    st.p[static_cast<size_t>(u) * k_ + sc] = ls.best_p;
    return rest + ls.best_val;
  }

  // 1-D search over the slot power with earlier floor-bound users tracking
  // their floors; prices the interference externality the plain move cannot.
  double tracked_move(AllocationState& st, int sc, int pos, double zeta,
                      double current) const {
    const auto& d = sc_[sc];
    const int u = d.users[pos];
    const double p_now = st.power(u, sc);
    if (!(p_now > 0)) return current;
    // earlier users currently sitting at their requirement track it exactly
    bool tracked[kMaxPerSc] = {false};
    double saved[kMaxPerSc];
    int n_tracked = 0;
    for (int j = 0; j < pos; ++j) {
      saved[j] = power_at(st, sc, j);
      const double floor_j = min_power_at(st, sc, j);
      if (saved[j] <= floor_j * (1.0 + 1e-3)) {
        tracked[j] = true;
        ++n_tracked;
      }
    }
    if (n_tracked == 0) return current;
    const double lo = min_power_at(st, sc, pos);
    double hi = cfg_.users[u].max_power_w - (st.total_power(u) - p_now);
    if (!(hi > 0) || lo > hi) return current;

    const double keep = current - (prefix_rate(st, sc, pos + 1) - zeta * st.total_power());
    // positions above pos contribute too once their powers move
    const double rest =
        keep + (prefix_rate(st, sc, pos + 1) - prefix_rate(st, sc, d.users.size()));
    auto apply = [&](double p) -> bool {
      st.p[static_cast<size_t>(u) * k_ + sc] = p;
      for (int j = pos - 1; j >= 0; --j) {
        if (!tracked[j]) continue;
        const double f = min_power_at(st, sc, j);
        const int v = d.users[j];
        if (f > cfg_.users[v].max_power_w - (st.total_power(v) - power_at(st, sc, j)))
          return false;
        st.p[static_cast<size_t>(v) * k_ + sc] = f;
      }
      // non-tracked earlier users must stay above their requirement
      for (int j = 0; j < pos; ++j)
        if (!tracked[j] &&
            !meets_ge(power_at(st, sc, j), min_power_at(st, sc, j)))
          return false;
      return true;
    };
    auto eval = [&](double p) {
      if (!apply(p)) return -1e300;
      return prefix_rate(st, sc, d.users.size()) - zeta * st.total_power();
    };
    const double val_now = current - rest;
    const auto ls = line_max(eval, lo, hi, p_now, val_now);
    if (ls.best_p == p_now || !apply(ls.best_p)) {
      st.p[static_cast<size_t>(u) * k_ + sc] = p_now;
      for (int j = 0; j < pos; ++j)
        st.p[static_cast<size_t>(d.users[j]) * k_ + sc] = saved[j];
      return current;
    }
    return rest + eval(ls.best_p);
  }

  // Scales every power on the SC by a common factor; SINRs rise with the
  // factor, so the feasible range floor comes from the requirement margins.
  double scale_move(AllocationState& st, int sc, double zeta, double current) const {
    const auto& d = sc_[sc];
    const size_t n = d.users.size();
    if (n < 2) return current;
    double base[kMaxPerSc];
    for (size_t i = 0; i < n; ++i) {
      base[i] = power_at(st, sc, i);
      if (!(base[i] > 0)) return current;
    }
    double s_lo = 0, s_hi = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      const int u = d.users[i];
      const double y = base[i] * d.gain[i];
      double interf = 0;
      for (size_t j = i + 1; j < n; ++j) interf += base[j] * d.gain[j];
      const double thr = position_snr_req(st, sc, i);
      if (thr > 0) {
        const double margin = y - thr * interf;  // > 0 at any feasible point
        if (!(margin > 0)) return current;
        s_lo = std::max(s_lo, thr * d.sigma2 / margin);
      }
      const double room = cfg_.users[u].max_power_w - (st.total_power(u) - base[i]);
      s_hi = std::min(s_hi, room / base[i]);
    }
    if (!(s_hi > s_lo)) return current;

    const double rest = current - (prefix_rate(st, sc, n) - zeta * st.total_power());
    auto apply = [&](double s) {
      for (size_t i = 0; i < n; ++i)
        st.p[static_cast<size_t>(d.users[i]) * k_ + sc] = base[i] * s;
    };
    auto eval = [&](double s) {
      apply(s);
      return prefix_rate(st, sc, n) - zeta * st.total_power();
    };
    const auto ls = line_max(eval, s_lo, s_hi, 1.0, current - rest);
    apply(ls.best_p);
    return rest + ls.best_val;
  }

  // zeta-parameterized sweep in reverse decoding order. requirement_only
  // replaces every objective by "meet the target at minimum power".
  bool sweep(AllocationState& out, double zeta, bool requirement_only) const {
    out = AllocationState::zeros(b_.users, k_);
    std::vector<size_t> pos(k_);
    std::vector<double> interf(k_, 0.0);
    size_t remaining = 0;
    for (int sc = 0; sc < k_; ++sc) {
      pos[sc] = sc_[sc].users.size();
      remaining += pos[sc];
    }
    auto gb_ready = [&](int u) {
      for (int sc : user_scs_[u])
        if (pos[sc] == 0 || sc_[sc].users[pos[sc] - 1] != u) return false;
      return true;
    };
    while (remaining > 0) {
      bool progress = false;
      for (int sc = 0; sc < k_; ++sc) {
        const auto& d = sc_[sc];
        while (pos[sc] > 0) {
          const int u = d.users[pos[sc] - 1];
          const auto& dev = cfg_.users[u];
          if (dev.service == ServiceClass::Mmtc) {
            const double a = effective_gain(ch_.gain(u, sc), interf[sc], d.sigma2);
            const double thr = d.snr_floor[pos[sc] - 1];
            double p;
            if (requirement_only) {
              p = thr / a;
              if (!meets_le(p, dev.max_power_w)) return false;
            } else {
              const auto res = optimize_mmtc_power(a, thr, dev.max_power_w, zeta, d.w);
              if (!res.feasible) return false;
              p = res.power_w;
            }
            out.assign(u, sc, p);
            interf[sc] += p * ch_.gain(u, sc);
            --pos[sc];
            --remaining;
            progress = true;
            continue;
          }
          if (!gb_ready(u)) break;  // another of its SCs still has users pending
          const auto& grants = user_scs_[u];
          std::vector<double> a_eff(grants.size());
          double w = 0;
          for (size_t j = 0; j < grants.size(); ++j) {
            const int g = grants[j];
            a_eff[j] = effective_gain(ch_.gain(u, g), interf[g], sc_[g].sigma2);
            w = cfg_.subchannels[g].bandwidth_hz;
          }
          std::vector<double> powers;
          if (dev.service == ServiceClass::Embb) {
            if (requirement_only) {
              if (!embb_min_power(a_eff, dev.rate_target_bps, dev.max_power_w, w, powers))
                return false;
            } else {
              auto res = optimize_embb_power(a_eff, dev.rate_target_bps, dev.max_power_w,
                                             zeta, w, dual_);
              if (!res.feasible) return false;
              powers = std::move(res.powers_w);
            }
          } else {
            const double thr = target_snr(dev.packet_bits, dev.latency_s, w, dev.dep);
            if (requirement_only) {
              powers.resize(grants.size());
              double sum = 0;
              for (size_t j = 0; j < grants.size(); ++j) {
                powers[j] = thr / a_eff[j];
                sum += powers[j];
              }
              if (!meets_le(sum, dev.max_power_w)) return false;
            } else {
              auto res = optimize_urllc_power(a_eff, thr, dev.max_power_w, zeta, w,
                                              dev.latency_s, dev.dep, dual_);
              if (!res.feasible) return false;
              powers = std::move(res.powers_w);
            }
          }
          for (size_t j = 0; j < grants.size(); ++j) {
            const int g = grants[j];
            if (powers[j] > 0) {
              out.assign(u, g, powers[j]);
              interf[g] += powers[j] * ch_.gain(u, g);
            }
            --pos[g];
            --remaining;
          }
          progress = true;
          break;
        }
      }
      if (!progress && remaining > 0)
        throw std::logic_error("dinkelbach: power scheduling deadlock");
    }
    return true;
  }

  // minimum total power meeting the eMBB rate target: waterfill the level at
  // which the sum rate equals the target
  static bool embb_min_power(std::span<const double> a_eff, double rate_target,
                             double p_max, double w, std::vector<double>& powers) {
    const size_t n = a_eff.size();
    powers.assign(n, 0.0);
    if (rate_target <= 0) return true;
    const double min_inv_a = 1.0 / *std::max_element(a_eff.begin(), a_eff.end());
    auto rate_at = [&](double wl) {
      double s = 0;
      for (size_t j = 0; j < n; ++j)
        s += rate_embb(a_eff[j] * std::max(wl - 1.0 / a_eff[j], 0.0), w);
      return s;
    };
    const double wl = bisect_level(rate_at, rate_target, min_inv_a, min_inv_a + p_max);
    double sum = 0;
    for (size_t j = 0; j < n; ++j) {
      powers[j] = std::max(wl - 1.0 / a_eff[j], 0.0);
      sum += powers[j];
    }
    return meets_le(sum, p_max) && meets_ge(rate_at(wl), rate_target);
  }

  const AllocationState& b_;
  const ChannelRealization& ch_;
  const NetworkConfig& cfg_;
  const DualConfig& dual_;
  int k_;
  std::vector<ScData> sc_;
  std::vector<std::vector<int>> user_scs_;  // granted/selected SCs per user
};

// Full inner solve at fixed zeta: start from the best of {sequential sweep,
// minimal stack, previous iteration's solution} and refine. Starting no
// worse than the previous solution makes the zeta updates non-decreasing.
// Returns false iff the minimal stack itself is infeasible.
bool solve_powers_at(const AllocationState& assignment,
                     const ChannelRealization& channels, const NetworkConfig& config,
                     double zeta, const DualConfig& dual,
                     const AllocationState* warm, AllocationState& out) {
  InnerSolver solver(assignment, channels, config, dual);
  AllocationState minimal;
  if (!solver.minimal_stack(minimal)) return false;
  AllocationState swept;
  const bool sweep_ok = solver.sequential_sweep(swept, zeta) && solver.feasible(swept);

  // the first outer iterations explore both starting basins; once a warm
  // solution exists the basin is settled and one refinement suffices
  if (warm) {
    double best = solver.objective(minimal, zeta);
    out = std::move(minimal);
    if (sweep_ok && solver.objective(swept, zeta) > best) {
      best = solver.objective(swept, zeta);
      out = std::move(swept);
    }
    if (solver.objective(*warm, zeta) > best) out = *warm;
    solver.refine(out, zeta);
  } else {
    solver.refine(minimal, zeta);
    double minimal_val = solver.objective(minimal, zeta);
    double sweep_val = -1e300;
    if (sweep_ok) {
      solver.refine(swept, zeta);
      sweep_val = solver.objective(swept, zeta);
    }
    out = (sweep_ok && sweep_val > minimal_val) ? std::move(swept) : std::move(minimal);
  }
  for (int u = 0; u < out.users; ++u)  // a refined power of 0 relinquishes the SC
    for (int sc = 0; sc < out.subchannels; ++sc)
      if (out.occupied(u, sc) && !(out.power(u, sc) > 0)) out.clear(u, sc);
  return true;
}

}  // namespace

DinkelbachResult dinkelbach_allocate(const AllocationState& assignment,
                                     const ChannelRealization& channels,
                                     const NetworkConfig& config,
                                     const DinkelbachConfig& cfg) {
  // pre: (C1) and (C2)
  for (int sc = 0; sc < config.num_subchannels(); ++sc) {
    int gb = 0;
    for (int u : assignment.users_on(sc))
      gb += (config.users[u].service != ServiceClass::Mmtc);
    if (gb > 1) throw std::invalid_argument("dinkelbach_allocate: (C1) violated");
  }
  for (const auto& dev : config.users)
    if (dev.service == ServiceClass::Mmtc &&
        assignment.subchannels_of(dev.id).size() != 1)
      throw std::invalid_argument("dinkelbach_allocate: (C2) violated");

  DinkelbachResult res;
  double zeta = 0;
  AllocationState solved;
  bool have_warm = false;
  AllocationState warm;
  for (int q = 1; q <= cfg.max_outer; ++q) {
    res.iterations = q;
    if (!solve_powers_at(assignment, channels, config, zeta, cfg.dual,
                         have_warm ? &warm : nullptr, solved)) {
      res.feasible = false;
      res.zeta = zeta;
      return res;
    }
    warm = solved;
    have_warm = true;
    const double next = ee_factor(solved, channels, config);
    res.zeta_trace.push_back(next);
    const double tau = cfg.tol_rel * std::max({std::abs(next), std::abs(zeta), 1e-300});
    if (std::abs(next - zeta) <= tau) {
      res.state = std::move(solved);
      res.zeta = next;
      res.feasible = true;
      res.converged = true;
      return res;
    }
    zeta = next;
  }
  res.state = std::move(solved);
  res.zeta = zeta;
  res.feasible = true;
  res.converged = false;  // iteration cap; last zeta carried back
  return res;
}

}  // namespace sgnoma
