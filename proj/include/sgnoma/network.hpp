#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgnoma {

enum class ServiceClass { Urllc, Embb, Mmtc };

std::string to_string(ServiceClass s);

// One 5G-NR subchannel. service_set partitions K into K_U (Urllc) and
// K_E (Embb); mMTC users may access either set.
struct Subchannel {
  int id = 0;
  int numerology = 0;       // nu in {0..4}
  double bandwidth_hz = 0;  // 2^nu * 180 kHz
  ServiceClass service_set = ServiceClass::Embb;
};

struct UserDevice {
  int id = 0;
  ServiceClass service = ServiceClass::Mmtc;
  double x_m = 0, y_m = 0;     // position relative to the BS
  double max_power_w = 0;      // P_max
  // URLLC / mMTC QoS bundle
  double packet_bits = 0;      // n
  double latency_s = 0;        // D
  double dep = 0;              // decoding error probability target
  // eMBB QoS
  double rate_target_bps = 0;  // R_e^tar

  double distance_m() const;
};

struct NoiseModel {
  double figure_db = 6.0;      // F
  double psd_dbm_hz = -174.0;  // N0
  double circuit_power_w = 0.05;
};

// Fully instantiated cell: subchannels, positioned users, propagation model.
struct NetworkConfig {
  std::vector<Subchannel> subchannels;
  std::vector<UserDevice> users;
  NoiseModel noise;
  double cell_radius_m = 500.0;
  // log-distance path loss: PL(d) [dB] = ref + slope * log10(d / 1 km)
  double pathloss_ref_db = 128.1;
  double pathloss_slope_db = 37.6;
  double rician_k_db = 10.0;
  // gb_grants[u] lists the SC ids granted to GB user u (empty for mMTC)
  std::vector<std::vector<int>> gb_grants;

  int num_subchannels() const { return static_cast<int>(subchannels.size()); }
  int num_users() const { return static_cast<int>(users.size()); }
  std::vector<int> users_of(ServiceClass s) const;
  int count_of(ServiceClass s) const;
  double noise_power_w(int sc) const;  // sigma_k^2
};

// Grants each URLLC user one SC from K_U and each eMBB user one SC from
// K_E, round-robin by user id. Fixed for the lifetime of a run.
void grant_gb_round_robin(NetworkConfig& config);

// Per-TS channel gains g_z^(k)(t), linear power gains, one row per user.
struct ChannelRealization {
  int t = 0;
  int users = 0;
  int subchannels = 0;
  std::vector<double> g;

  static ChannelRealization zeros(int users, int subchannels, int t = 0);
  double gain(int user, int sc) const { return g[static_cast<size_t>(user) * subchannels + sc]; }
  double& gain(int user, int sc) { return g[static_cast<size_t>(user) * subchannels + sc]; }
};

// SC occupancy b_z^(k) and transmit powers P_z^(k). The pair invariant
// P > 0 iff b = 1 is maintained by assign/clear.
struct AllocationState {
  int users = 0;
  int subchannels = 0;
  std::vector<std::uint8_t> b;
  std::vector<double> p;

  static AllocationState zeros(int users, int subchannels);
  bool occupied(int user, int sc) const { return b[idx(user, sc)] != 0; }
  double power(int user, int sc) const { return p[idx(user, sc)]; }
  void assign(int user, int sc, double power_w);
  void clear(int user, int sc);
  double total_power(int user) const;   // sum over SCs
  double total_power() const;           // P^Tx
  std::vector<int> users_on(int sc) const;
  std::vector<int> subchannels_of(int user) const;

 private:
  size_t idx(int user, int sc) const { return static_cast<size_t>(user) * subchannels + sc; }
};

}  // namespace sgnoma
