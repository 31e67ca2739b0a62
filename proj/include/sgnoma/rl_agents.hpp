#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sgnoma/neural_net.hpp"
#include "sgnoma/rng.hpp"

namespace sgnoma {

struct ActionSpace {
  enum class Mode { FullMad, Homad };
  Mode mode = Mode::FullMad;
  int subchannels = 0;  // K
  int levels = 0;       // L, FullMad only
  int size() const { return mode == Mode::FullMad ? subchannels * levels : subchannels; }
};

struct DecodedAction {
  int sc = 0;
  int level = -1;  // -1 under Homad (power is optimized, not selected)
};

// FullMad lays actions out as sc-major blocks of L levels; Homad actions are
// the SC index itself. Throws std::out_of_range past size().
DecodedAction decode_action(int index, const ActionSpace& space);
int encode_action(const DecodedAction& a, const ActionSpace& space);

// L quantized transmit power levels, uniform in dBm over
// [P_max - 20 dB, P_max]; index 0 is the lowest level.
std::vector<double> tpl_levels_w(double p_max_w, int levels);

// Agent observation s_m = [gains | prev SC indicators | prev powers].
// Gains enter in dB mapped affinely to about [-1, 1]; powers are normalized
// by P_max. The c-block is all zero at t = 1.
struct StateCodec {
  int subchannels = 0;
  double p_max_w = 0.2;
  double gain_db_center = -100.0;
  double gain_db_halfspan = 35.0;

  int state_size() const { return 3 * subchannels; }
  std::vector<double> encode(std::span<const double> gains_linear,
                             std::span<const std::uint8_t> prev_b,
                             std::span<const double> prev_p_w) const;
  struct Decoded {
    std::vector<double> gains_linear;
    std::vector<std::uint8_t> prev_b;
    std::vector<double> prev_p_w;
  };
  Decoded decode(std::span<const double> state) const;
};

struct Experience {
  std::vector<double> state, next_state;
  int action = 0;
  double reward = 0;
};

// Bounded FIFO with uniform sampling.
class ReplayMemory {
 public:
  explicit ReplayMemory(size_t capacity);
  void push(Experience e);
  size_t size() const { return buf_.size(); }
  size_t capacity() const { return capacity_; }
  bool can_sample(size_t batch) const { return buf_.size() >= batch; }
  const Experience& oldest() const;
  std::vector<const Experience*> sample(size_t batch, Rng& rng) const;

 private:
  size_t capacity_;
  size_t next_ = 0;  // ring cursor once full
  std::vector<Experience> buf_;
};

// Lowest index wins ties.
int greedy_argmax(std::span<const double> q);

// Uniform-random with probability eps, otherwise argmax of the online
// Q-values. eps = 0 consumes no randomness.
int select_action(const Mlp& net, std::span<const double> state, double eps,
                  const ActionSpace& space, Rng& rng);

struct DqnConfig {
  std::vector<int> hidden = {256, 128, 64};
  AdamConfig adam;          // lr 0.001
  double discount = 0.9;    // gamma
  double reward_scale = 1e-7;  // rewards are bits/J; Q-learning needs O(1) targets
  int batch = 48;
  size_t replay_capacity = 10000;
};

// One mMTC agent's DQN stack: online/target nets, replay memory, Adam state.
class DqnAgent {
 public:
  DqnAgent(int state_size, ActionSpace space, const DqnConfig& cfg, std::uint64_t seed);

  int act(std::span<const double> state, double eps);
  void remember(Experience e) { memory_.push(std::move(e)); }

  // Samples a minibatch and applies one gradient step; nullopt while the
  // memory holds fewer than `batch` experiences.
  std::optional<double> train_step();
  // Loss target y = r_scaled + gamma * max_a Q(s', a; target); squared error
  // at the taken action, averaged over the batch.
  double train_on(std::span<const Experience* const> batch);

  void sync_target();
  long sync_count() const { return sync_count_; }
  long rejected_steps() const { return rejected_steps_; }
  const Mlp& online() const { return online_; }
  const Mlp& target() const { return target_; }
  Mlp& mutable_online() { return online_; }
  const ActionSpace& actions() const { return space_; }
  const ReplayMemory& memory() const { return memory_; }

 private:
  ActionSpace space_;
  DqnConfig cfg_;
  Mlp online_, target_;
  AdamState adam_;
  ReplayMemory memory_;
  Rng rng_;
  long sync_count_ = 0;
  long rejected_steps_ = 0;
};

struct QlConfig {
  double alpha = 0.001;
  double discount = 0.9;
  double reward_scale = 1e-7;
};

// Tabular baseline. The continuous gain block is discretized to 4 bins per
// SC by dB quartiles of the agent's own gain distribution; the previous
// action id completes the key. Unseen entries default to 0.
class QTableAgent {
 public:
  // edges_db[k] holds the three quartile boundaries for SC k.
  QTableAgent(std::vector<std::array<double, 3>> edges_db, ActionSpace space,
              const QlConfig& cfg, std::uint64_t seed);

  std::uint64_t key_of(std::span<const double> gains_linear, int prev_action) const;
  int act(std::uint64_t state_key, double eps);
  // Q(s,a) += alpha [r_scaled + gamma max_a' Q(s',a') - Q(s,a)]
  void update(std::uint64_t s, int a, double reward, std::uint64_t s_next);

  double q_value(std::uint64_t s, int a) const;
  size_t table_size() const { return table_.size(); }
  const ActionSpace& actions() const { return space_; }

 private:
  std::vector<double>& row(std::uint64_t key);
  std::vector<std::array<double, 3>> edges_db_;
  ActionSpace space_;
  QlConfig cfg_;
  std::unordered_map<std::uint64_t, std::vector<double>> table_;
  Rng rng_;
};

}  // namespace sgnoma
