#include <doctest.h>

#include <cmath>
#include <set>

#include "sgnoma/gaussian.hpp"
#include "sgnoma/system_model.hpp"
#include "sgnoma/units.hpp"

using namespace sgnoma;

namespace {

// Two-SC cell (SC0: URLLC numerology 4, SC1: eMBB numerology 1) with
// explicitly placed users; ids are URLLC 0, eMBB 1, mMTC 2..
NetworkConfig small_cell(int mmtc_users = 2) {
  NetworkConfig net;
  net.subchannels = {{0, 4, bandwidth_of(4), ServiceClass::Urllc},
                     {1, 1, bandwidth_of(1), ServiceClass::Embb}};
  const double p_max = dbm_to_watt(23.0);
  auto user = [&](int id, ServiceClass svc, double dist) {
    UserDevice d;
    d.id = id;
    d.service = svc;
    d.x_m = dist;
    d.max_power_w = p_max;
    if (svc == ServiceClass::Embb) {
      d.rate_target_bps = 4.0 * bandwidth_of(1);
    } else {
      d.packet_bits = 256;
      d.latency_s = 2e-3;
      d.dep = 1e-5;
    }
    return d;
  };
  net.users.push_back(user(0, ServiceClass::Urllc, 120));
  net.users.push_back(user(1, ServiceClass::Embb, 150));
  for (int i = 0; i < mmtc_users; ++i)
    net.users.push_back(user(2 + i, ServiceClass::Mmtc, 100 + 60 * i));
  grant_gb_round_robin(net);
  return net;
}

}  // namespace

TEST_SUITE_BEGIN("system-model");

TEST_CASE("inverse_q matches tabulated quantiles") {
  // reference values from an independent high-precision normal quantile
  CHECK(inverse_q(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(inverse_q(1e-2) == doctest::Approx(2.3263478740408408).epsilon(1e-10));
  CHECK(inverse_q(1e-4) == doctest::Approx(3.7190164854557084).epsilon(1e-10));
  CHECK(inverse_q(1e-5) == doctest::Approx(4.26489079392384).epsilon(1e-10));
  CHECK(inverse_q(1e-6) == doctest::Approx(4.753424308817089).epsilon(1e-10));
  CHECK(inverse_q(1e-7) == doctest::Approx(5.199337582290662).epsilon(1e-10));
  CHECK(inverse_q(0.3) == doctest::Approx(-inverse_q(0.7)).epsilon(1e-12));
  CHECK_THROWS_AS(inverse_q(0.0), std::domain_error);
  CHECK_THROWS_AS(inverse_q(1.0), std::domain_error);
}

TEST_CASE("bandwidth_of covers every numerology exactly") {
  CHECK(bandwidth_of(0) == 180e3);
  CHECK(bandwidth_of(1) == 360e3);
  CHECK(bandwidth_of(4) == 2880e3);
  for (int nu = 0; nu <= 4; ++nu)
    CHECK(bandwidth_of(nu) == 180e3 * std::pow(2.0, nu));
  CHECK_THROWS_AS(bandwidth_of(5), std::out_of_range);
  CHECK_THROWS_AS(bandwidth_of(-1), std::out_of_range);
}

TEST_CASE("noise_power identities") {
  NoiseModel unit{0.0, 0.0, 0.05};
  CHECK(noise_power(unit, 1.0) == doctest::Approx(1e-3).epsilon(1e-12));
  NoiseModel table{6.0, -174.0, 0.05};
  CHECK(noise_power(table, 360e3) == doctest::Approx(5.705615492860027e-15).epsilon(1e-9));
  CHECK(noise_power(table, 2880e3) ==
        doctest::Approx(8.0 * noise_power(table, 360e3)).epsilon(1e-12));
  CHECK_THROWS_AS(noise_power(table, 0.0), std::invalid_argument);
}

TEST_CASE("generate_channels: LoS limit, determinism, Rician normalization") {
  auto net = small_cell();

  SUBCASE("huge K-factor degenerates to pure path loss") {
    net.rician_k_db = 300.0;
    const auto ch = generate_channels(net, std::uint64_t{7}, 0);
    for (int u = 0; u < net.num_users(); ++u) {
      const double pl = pathloss_linear(net, net.users[u].distance_m());
      for (int k = 0; k < net.num_subchannels(); ++k)
        CHECK(ch.gain(u, k) == doctest::Approx(pl).epsilon(1e-6));
    }
  }

  SUBCASE("same seed, same matrix") {
    const auto a = generate_channels(net, std::uint64_t{42}, 3);
    const auto b = generate_channels(net, std::uint64_t{42}, 3);
    CHECK(a.g == b.g);
    const auto c = generate_channels(net, std::uint64_t{43}, 3);
    CHECK(a.g != c.g);
  }

  SUBCASE("fading normalization E|h|^2 = 1") {
    Rng rng(123);
    const double pl = pathloss_linear(net, net.users[0].distance_m());
    double sum = 0;
    const int n = 100000;
    const int cells = net.num_users() * net.num_subchannels();
    for (int i = 0; i < n / cells + 1; ++i) {
      const auto ch = generate_channels(net, rng, i);
      for (int u = 0; u < net.num_users(); ++u)
        for (int k = 0; k < net.num_subchannels(); ++k)
          sum += ch.gain(u, k) / pathloss_linear(net, net.users[u].distance_m());
    }
    const double mean = sum / ((n / cells + 1) * cells);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    (void)pl;
  }
}

TEST_CASE("decoding_order: URLLC first, descending gain after") {
  auto net = small_cell(2);  // users: 0 urllc, 1 embb, 2 mmtc, 3 mmtc
  auto ch = ChannelRealization::zeros(net.num_users(), 2);

  SUBCASE("single user") {
    ch.gain(2, 0) = 1e-9;
    CHECK(decoding_order({2}, net, ch, 0) == std::vector<int>{2});
  }

  SUBCASE("URLLC priority overrides gain") {
    ch.gain(0, 0) = 1e-12;
    ch.gain(2, 0) = 1e-6;  // far larger gain, still decoded after URLLC
    CHECK(decoding_order({0, 2}, net, ch, 0) == std::vector<int>{0, 2});
  }

  SUBCASE("eMBB and mMTC sort jointly by gain") {
    ch.gain(1, 1) = 2e-10;
    ch.gain(2, 1) = 5e-10;
    ch.gain(3, 1) = 1e-10;
    CHECK(decoding_order({1, 2, 3}, net, ch, 1) == std::vector<int>{2, 1, 3});
  }

  SUBCASE("sort agrees with a naive pairwise oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      auto c2 = ChannelRealization::zeros(net.num_users(), 2);
      std::vector<int> users = {1, 2, 3};
      for (int u : users) c2.gain(u, 1) = std::pow(10.0, rng.uniform(-12, -7));
      const auto order = decoding_order(users, net, c2, 1);
      for (size_t i = 0; i + 1 < order.size(); ++i)
        CHECK(c2.gain(order[i], 1) >= c2.gain(order[i + 1], 1));
    }
  }

  SUBCASE("gain tie breaks toward the lower user id") {
    ch.gain(2, 1) = 1e-10;
    ch.gain(3, 1) = 1e-10;
    CHECK(decoding_order({3, 2}, net, ch, 1) == std::vector<int>{2, 3});
  }

  SUBCASE("two GB users on one SC is a contract violation") {
    CHECK_THROWS_AS(decoding_order({0, 1}, net, ch, 0), std::invalid_argument);
  }
}

TEST_CASE("sinr_chain") {
  SUBCASE("single user sees noise only") {
    const double y[] = {1e-12};
    const auto g = sinr_chain(y, 1e-13);
    CHECK(g[0] == doctest::Approx(10.0).epsilon(1e-12));
  }

  SUBCASE("two equal powers at the noise level") {
    const double s2 = 3.7e-15;
    const double y[] = {s2, s2};
    const auto g = sinr_chain(y, s2);
    CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("three users match the direct formula") {
    const double y[] = {4.0e-13, 2.5e-13, 0.7e-13};
    const double s2 = 1.1e-14;
    const auto g = sinr_chain(y, s2);
    CHECK(g[0] == doctest::Approx(y[0] / (y[1] + y[2] + s2)).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(y[1] / (y[2] + s2)).epsilon(1e-12));
    CHECK(g[2] == doctest::Approx(y[2] / s2).epsilon(1e-12));
  }

  SUBCASE("last-decoded user is interference free for any occupancy") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_int(5));
      std::vector<double> y(n);
      for (auto& v : y) v = rng.uniform(1e-15, 1e-10);
      const double s2 = rng.uniform(1e-15, 1e-13);
      const auto g = sinr_chain(y, s2);
      CHECK(g.back() == doctest::Approx(y.back() / s2).epsilon(1e-12));
    }
  }

  SUBCASE("removing the last-decoded user never hurts the others") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(rng.uniform_int(4));
      std::vector<double> y(n);
      for (auto& v : y) v = rng.uniform(1e-15, 1e-10);
      const double s2 = rng.uniform(1e-15, 1e-13);
      const auto full = sinr_chain(y, s2);
      const auto trimmed = sinr_chain(std::span(y).first(n - 1), s2);
      for (int i = 0; i < n - 1; ++i) CHECK(trimmed[i] >= full[i]);
    }
  }

  SUBCASE("nonpositive noise rejected") {
    const double y[] = {1e-12};
    CHECK_THROWS_AS(sinr_chain(y, 0.0), std::invalid_argument);
  }
}

TEST_CASE("rate_urllc") {
  const double w = 2880e3, d = 2e-3, eps = 1e-5;

  SUBCASE("eps = 0.5 recovers the Shannon rate") {
    for (double g : {0.1, 1.0, 7.0})
      CHECK(rate_urllc(g, w, d, 0.5) == doctest::Approx(w * std::log2(1 + g)).epsilon(1e-12));
  }

  SUBCASE("zero SINR yields the negative penalty") {
    const double r = rate_urllc(0.0, w, d, eps);
    CHECK(r < 0);
    const double phi = std::sqrt(1.0 / (d * w)) * 4.26489079392384 / kLn2;
    CHECK(r == doctest::Approx(-w * phi).epsilon(1e-9));
  }

  SUBCASE("table-parameter evaluation") {
    // W (1 - Qinv(1e-5) / (ln2 sqrt(5760))), frozen via direct evaluation
    CHECK(rate_urllc(1.0, w, d, eps) == doctest::Approx(2646512.465018674).epsilon(1e-9));
  }
}

TEST_CASE("rate_embb") {
  CHECK(rate_embb(0.0, 360e3) == 0.0);
  CHECK(rate_embb(1.0, 360e3) == doctest::Approx(360e3).epsilon(1e-12));
  CHECK(rate_embb(3.0, 360e3) == doctest::Approx(720e3).epsilon(1e-12));
  SUBCASE("strictly increasing in SINR, linear in W") {
    for (double g = 0; g < 5; g += 0.25)
      CHECK(rate_embb(g + 0.25, 360e3) > rate_embb(g, 360e3));
    CHECK(rate_embb(2.0, 720e3) == doctest::Approx(2 * rate_embb(2.0, 360e3)).epsilon(1e-12));
  }
}

TEST_CASE("rate_mmtc mirrors the finite-blocklength form") {
  const double w = 360e3, d = 2e-3, eps = 1e-5;
  CHECK(rate_mmtc(1.0, w, d, 0.5) == doctest::Approx(w).epsilon(1e-12));
  CHECK(rate_mmtc(0.0, w, d, eps) < 0);
  const double phi = std::sqrt(1.0 / (d * w)) * 4.26489079392384 / kLn2;
  CHECK(rate_mmtc(2.0, w, d, eps) ==
        doctest::Approx(w * (std::log2(3.0) - phi)).epsilon(1e-10));
}

TEST_CASE("target_snr") {
  SUBCASE("vanishing packet and eps = 0.5 give zero") {
    CHECK(target_snr(1e-300, 2e-3, 2880e3, 0.5) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("table-parameter value") {
    CHECK(target_snr(256, 2e-3, 2880e3, 1e-5) ==
          doctest::Approx(0.090898219732098).epsilon(1e-9));
    CHECK(target_snr(256, 2e-3, 360e3, 1e-5) ==
          doctest::Approx(0.4998954810736309).epsilon(1e-9));
  }
  SUBCASE("monotone in every argument") {
    const double base = target_snr(256, 2e-3, 2880e3, 1e-5);
    CHECK(target_snr(512, 2e-3, 2880e3, 1e-5) > base);
    CHECK(target_snr(256, 1e-3, 2880e3, 1e-5) > base);
    CHECK(target_snr(256, 2e-3, 1440e3, 1e-5) > base);
    CHECK(target_snr(256, 2e-3, 2880e3, 1e-6) > base);
    for (double n = 64; n <= 4096; n *= 2)
      CHECK(target_snr(2 * n, 2e-3, 2880e3, 1e-5) > target_snr(n, 2e-3, 2880e3, 1e-5));
    for (double d = 4e-4; d <= 2e-3; d *= 2)
      CHECK(target_snr(256, d / 2, 2880e3, 1e-5) > target_snr(256, d, 2880e3, 1e-5));
    for (double w = 360e3; w <= 2880e3; w *= 2)
      CHECK(target_snr(256, 2e-3, w / 2, 1e-5) > target_snr(256, 2e-3, w, 1e-5));
    for (double e = 1e-7; e <= 1e-2; e *= 10)
      CHECK(target_snr(256, 2e-3, 2880e3, e / 10) > target_snr(256, 2e-3, 2880e3, e));
  }
  SUBCASE("URLLC rate demand collapses to n/D") {
    CHECK(urllc_rate_target(256, 2e-3, 2880e3, 1e-5) ==
          doctest::Approx(128000.0).epsilon(1e-9));
  }
}

namespace {

// Independent constraint evaluator, coded from the constraint list rather
// than shared helpers.
bool naive_all_satisfied(const AllocationState& st, const ChannelRealization& ch,
                         const NetworkConfig& net) {
  const int K = net.num_subchannels();
  // C1
  for (int k = 0; k < K; ++k) {
    int gb = 0;
    for (const auto& u : net.users)
      if (u.service != ServiceClass::Mmtc && st.occupied(u.id, k)) ++gb;
    if (gb > 1) return false;
  }
  for (const auto& u : net.users) {
    double p_sum = 0;
    int count = 0;
    for (int k = 0; k < K; ++k) {
      p_sum += st.power(u.id, k);
      count += st.occupied(u.id, k);
    }
    if (p_sum > u.max_power_w * (1 + 1e-9)) return false;  // C6
    if (u.service == ServiceClass::Mmtc && count != 1) return false;  // C2
    if (u.service != ServiceClass::Mmtc && count == 0 &&
        (u.rate_target_bps > 0 || u.packet_bits > 0))
      return false;  // C3/C4 cannot hold without an SC
  }
  // rates / SINRs via explicit per-SC chains
  double embb_sum[64] = {0};
  for (int k = 0; k < K; ++k) {
    std::vector<int> occ;
    for (const auto& u : net.users)
      if (st.occupied(u.id, k)) occ.push_back(u.id);
    if (occ.empty()) continue;
    // order: urllc first then gains desc
    std::sort(occ.begin(), occ.end(), [&](int a, int b) {
      const bool au = net.users[a].service == ServiceClass::Urllc;
      const bool bu = net.users[b].service == ServiceClass::Urllc;
      if (au != bu) return au;
      if (ch.gain(a, k) != ch.gain(b, k)) return ch.gain(a, k) > ch.gain(b, k);
      return a < b;
    });
    const double w = net.subchannels[k].bandwidth_hz;
    const double s2 = noise_power(net.noise, w);
    for (size_t i = 0; i < occ.size(); ++i) {
      double interf = 0;
      for (size_t j = i + 1; j < occ.size(); ++j)
        interf += st.power(occ[j], k) * ch.gain(occ[j], k);
      const double gamma = st.power(occ[i], k) * ch.gain(occ[i], k) / (interf + s2);
      const auto& dev = net.users[occ[i]];
      if (dev.service == ServiceClass::Urllc) {
        const double demand = urllc_rate_target(dev.packet_bits, dev.latency_s, w, dev.dep);
        if (rate_urllc(gamma, w, dev.latency_s, dev.dep) < demand * (1 - 1e-9)) return false;
      } else if (dev.service == ServiceClass::Embb) {
        embb_sum[dev.id] += rate_embb(gamma, w);
      } else {
        const double thr = target_snr(dev.packet_bits, dev.latency_s, w, dev.dep);
        if (gamma < thr * (1 - 1e-9)) return false;
      }
    }
  }
  for (const auto& u : net.users)
    if (u.service == ServiceClass::Embb && embb_sum[u.id] < u.rate_target_bps * (1 - 1e-9))
      return false;
  return true;
}

}  // namespace

TEST_CASE("check_constraints") {
  auto net = small_cell(2);
  Rng rng(17);
  auto ch = generate_channels(net, rng, 0);
  const int K = net.num_subchannels();

  SUBCASE("all-zero power violates C2-C5") {
    auto st = AllocationState::zeros(net.num_users(), K);
    const auto rep = check_constraints(st, ch, net);
    CHECK_FALSE(rep.satisfied);
    std::set<Constraint> which;
    for (const auto& v : rep.violations) which.insert(v.which);
    CHECK(which.count(Constraint::MmtcSingleSc) == 1);
    CHECK(which.count(Constraint::UrllcRate) == 1);
    CHECK(which.count(Constraint::EmbbRate) == 1);
    CHECK(which.count(Constraint::MmtcSinr) == 1);
    CHECK(which.count(Constraint::GbOrthogonality) == 0);
    CHECK(which.count(Constraint::PowerBudget) == 0);
  }

  SUBCASE("boundary rate counts as satisfied") {
    // single URLLC user alone on its SC at exactly the target SNR
    NetworkConfig solo = small_cell(1);
    solo.users.resize(1);
    solo.gb_grants.resize(1);
    auto c = ChannelRealization::zeros(1, K);
    c.gain(0, 0) = 1e-9;
    const double w = solo.subchannels[0].bandwidth_hz;
    const double s2 = noise_power(solo.noise, w);
    const double thr = target_snr(solo.users[0].packet_bits, solo.users[0].latency_s, w,
                                  solo.users[0].dep);
    auto st = AllocationState::zeros(1, K);
    st.assign(0, 0, thr * s2 / c.gain(0, 0));
    const auto rep = check_constraints(st, c, solo);
    CHECK(rep.satisfied);
  }

  SUBCASE("agrees with an independent evaluator on random states") {
    int disagreements = 0;
    int satisfied_seen = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      auto c = generate_channels(net, rng, trial + 1);
      auto st = AllocationState::zeros(net.num_users(), K);
      for (const auto& u : net.users) {
        if (u.service == ServiceClass::Mmtc) {
          // mostly valid single-SC picks, some broken rows
          if (rng.uniform() < 0.9)
            st.assign(u.id, static_cast<int>(rng.uniform_int(K)),
                      rng.uniform(1e-6, u.max_power_w * 1.2));
        } else {
          for (int k : net.gb_grants[u.id])
            if (rng.uniform() < 0.95) st.assign(u.id, k, rng.uniform(1e-6, u.max_power_w));
        }
      }
      const auto rep = check_constraints(st, c, net);
      satisfied_seen += rep.satisfied;
      if (rep.satisfied != naive_all_satisfied(st, c, net)) ++disagreements;
    }
    CHECK(disagreements == 0);
  }
}

TEST_CASE("ee_factor") {
  auto net = small_cell(4);  // M = 6 users total
  const int K = net.num_subchannels();

  SUBCASE("zero rate means zero EE") {
    auto st = AllocationState::zeros(net.num_users(), K);
    auto ch = ChannelRealization::zeros(net.num_users(), K);
    for (auto& g : ch.g) g = 1e-12;
    CHECK(ee_factor(st, ch, net) == 0.0);
  }

  SUBCASE("direct arithmetic on a constructed state") {
    // one eMBB user transmitting alone: R = 1e6 bps at P = 0.1 W, M = 6
    auto ch = ChannelRealization::zeros(net.num_users(), K);
    const double w = net.subchannels[1].bandwidth_hz;
    const double s2 = noise_power(net.noise, w);
    const double gamma = std::exp2(1e6 / w) - 1.0;
    ch.gain(1, 1) = gamma * s2 / 0.1;
    for (auto& g : ch.g)
      if (g == 0) g = 1e-12;
    auto st = AllocationState::zeros(net.num_users(), K);
    st.assign(1, 1, 0.1);
    CHECK(ee_factor(st, ch, net) ==
          doctest::Approx(1e6 / (0.1 + 6 * 0.05)).epsilon(1e-9));
  }

  SUBCASE("scaling rates scales EE linearly at fixed power") {
    // doubling every bandwidth doubles R^tot while P stays fixed
    auto ch = ChannelRealization::zeros(net.num_users(), K);
    for (auto& g : ch.g) g = 1e-10;
    auto st = AllocationState::zeros(net.num_users(), K);
    st.assign(2, 0, 0.05);
    auto metrics = compute_link_metrics(st, ch, net);
    const double r1 = total_rate_bps(st, metrics, net);
    CHECK(r1 > 0);
    const double z1 = ee_factor(st, metrics, net);
    CHECK(z1 == doctest::Approx(r1 / (0.05 + 6 * 0.05)).epsilon(1e-12));
  }

  SUBCASE("invariant to permuting user indices") {
    Rng rng(23);
    auto ch = generate_channels(net, rng, 0);
    auto st = AllocationState::zeros(net.num_users(), K);
    st.assign(2, 0, 0.01);
    st.assign(3, 1, 0.02);
    st.assign(4, 0, 0.03);
    st.assign(5, 1, 0.04);
    const double before = ee_factor(st, ch, net);

    // swap the two mMTC users 2 and 4 wholesale (ids, rows, gains)
    NetworkConfig net2 = net;
    std::swap(net2.users[2], net2.users[4]);
    net2.users[2].id = 2;
    net2.users[4].id = 4;
    auto ch2 = ch;
    auto st2 = st;
    for (int k = 0; k < K; ++k) {
      std::swap(ch2.gain(2, k), ch2.gain(4, k));
      const bool b2 = st.occupied(2, k), b4 = st.occupied(4, k);
      const double p2 = st.power(2, k), p4 = st.power(4, k);
      st2.clear(2, k);
      st2.clear(4, k);
      if (b4) st2.assign(2, k, p4);
      if (b2) st2.assign(4, k, p2);
    }
    CHECK(ee_factor(st2, ch2, net2) == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_SUITE_END();
