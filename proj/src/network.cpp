#include "sgnoma/network.hpp"

#include <cmath>

#include "sgnoma/system_model.hpp"

namespace sgnoma {

std::string to_string(ServiceClass s) {
  switch (s) {
    case ServiceClass::Urllc: return "urllc";
    case ServiceClass::Embb: return "embb";
    case ServiceClass::Mmtc: return "mmtc";
  }
  return "?";
}

double UserDevice::distance_m() const { return std::hypot(x_m, y_m); }

std::vector<int> NetworkConfig::users_of(ServiceClass s) const {
  std::vector<int> out;
  for (const auto& u : users)
    if (u.service == s) out.push_back(u.id);
  return out;
}

int NetworkConfig::count_of(ServiceClass s) const {
  int n = 0;
  for (const auto& u : users) n += (u.service == s);
  return n;
}

double NetworkConfig::noise_power_w(int sc) const {
  return noise_power(noise, subchannels.at(sc).bandwidth_hz);
}

void grant_gb_round_robin(NetworkConfig& config) {
  config.gb_grants.assign(config.users.size(), {});
  std::vector<int> k_u, k_e;
  for (const auto& sc : config.subchannels)
    (sc.service_set == ServiceClass::Urllc ? k_u : k_e).push_back(sc.id);
  size_t next_u = 0, next_e = 0;
  for (const auto& user : config.users) {
    if (user.service == ServiceClass::Urllc) {
      if (k_u.empty()) throw std::runtime_error("no URLLC subchannels to grant");
      config.gb_grants[user.id].push_back(k_u[next_u++ % k_u.size()]);
    } else if (user.service == ServiceClass::Embb) {
      if (k_e.empty()) throw std::runtime_error("no eMBB subchannels to grant");
      config.gb_grants[user.id].push_back(k_e[next_e++ % k_e.size()]);
    }
  }
}

ChannelRealization ChannelRealization::zeros(int users, int subchannels, int t) {
  ChannelRealization c;
  c.t = t;
  c.users = users;
  c.subchannels = subchannels;
  c.g.assign(static_cast<size_t>(users) * subchannels, 0.0);
  return c;
}

AllocationState AllocationState::zeros(int users, int subchannels) {
  AllocationState s;
  s.users = users;
  s.subchannels = subchannels;
  s.b.assign(static_cast<size_t>(users) * subchannels, 0);
  s.p.assign(static_cast<size_t>(users) * subchannels, 0.0);
  return s;
}

void AllocationState::assign(int user, int sc, double power_w) {
  if (!(power_w > 0)) throw std::invalid_argument("assign: power must be positive");
  b[idx(user, sc)] = 1;
  p[idx(user, sc)] = power_w;
}

void AllocationState::clear(int user, int sc) {
  b[idx(user, sc)] = 0;
  p[idx(user, sc)] = 0.0;
}

double AllocationState::total_power(int user) const {
  double sum = 0;
  for (int k = 0; k < subchannels; ++k) sum += p[idx(user, k)];
  return sum;
}

double AllocationState::total_power() const {
  double sum = 0;
  for (double v : p) sum += v;
  return sum;
}

std::vector<int> AllocationState::users_on(int sc) const {
  std::vector<int> out;
  for (int u = 0; u < users; ++u)
    if (b[idx(u, sc)]) out.push_back(u);
  return out;
}

std::vector<int> AllocationState::subchannels_of(int user) const {
  std::vector<int> out;
  for (int k = 0; k < subchannels; ++k)
    if (b[idx(user, k)]) out.push_back(k);
  return out;
}

}  // namespace sgnoma
