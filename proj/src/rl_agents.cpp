#include "sgnoma/rl_agents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "sgnoma/units.hpp"

namespace sgnoma {

DecodedAction decode_action(int index, const ActionSpace& space) {
  if (index < 0 || index >= space.size())
    throw std::out_of_range("decode_action: index outside action space");
  if (space.mode == ActionSpace::Mode::Homad) return {index, -1};
  return {index / space.levels, index % space.levels};
}

int encode_action(const DecodedAction& a, const ActionSpace& space) {
  if (space.mode == ActionSpace::Mode::Homad) return a.sc;
  return a.sc * space.levels + a.level;
}

std::vector<double> tpl_levels_w(double p_max_w, int levels) {
  if (levels < 1) throw std::invalid_argument("tpl_levels_w: need at least one level");
  const double top_dbm = watt_to_dbm(p_max_w);
  std::vector<double> out(levels);
  if (levels == 1) {
    out[0] = p_max_w;
    return out;
  }
  for (int l = 0; l < levels; ++l)
    out[l] = dbm_to_watt(top_dbm - 20.0 * (levels - 1 - l) / (levels - 1));
  return out;
}

std::vector<double> StateCodec::encode(std::span<const double> gains_linear,
                                       std::span<const std::uint8_t> prev_b,
                                       std::span<const double> prev_p_w) const {
  const size_t k = static_cast<size_t>(subchannels);
  if (gains_linear.size() != k || prev_b.size() != k || prev_p_w.size() != k)
    throw std::invalid_argument("StateCodec::encode: block size mismatch");
  std::vector<double> s(3 * k);
  for (size_t i = 0; i < k; ++i) {
    s[i] = (linear_to_db(gains_linear[i]) - gain_db_center) / gain_db_halfspan;
    s[k + i] = prev_b[i] ? 1.0 : 0.0;
    s[2 * k + i] = prev_p_w[i] / p_max_w;
  }
  return s;
}

StateCodec::Decoded StateCodec::decode(std::span<const double> state) const {
  const size_t k = static_cast<size_t>(subchannels);
  if (state.size() != 3 * k) throw std::invalid_argument("StateCodec::decode: size mismatch");
  Decoded d;
  d.gains_linear.resize(k);
  d.prev_b.resize(k);
  d.prev_p_w.resize(k);
  for (size_t i = 0; i < k; ++i) {
    d.gains_linear[i] = db_to_linear(state[i] * gain_db_halfspan + gain_db_center);
    d.prev_b[i] = state[k + i] > 0.5 ? 1 : 0;
    d.prev_p_w[i] = state[2 * k + i] * p_max_w;
  }
  return d;
}

ReplayMemory::ReplayMemory(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayMemory: capacity must be positive");
  buf_.reserve(capacity);
}

void ReplayMemory::push(Experience e) {
  if (buf_.size() < capacity_) {
    buf_.push_back(std::move(e));
  } else {
    buf_[next_] = std::move(e);
    next_ = (next_ + 1) % capacity_;
  }
}

const Experience& ReplayMemory::oldest() const {
  if (buf_.empty()) throw std::out_of_range("ReplayMemory::oldest: empty");
  return buf_.size() < capacity_ ? buf_.front() : buf_[next_];
}

std::vector<const Experience*> ReplayMemory::sample(size_t batch, Rng& rng) const {
  if (!can_sample(batch)) throw std::logic_error("ReplayMemory::sample: not enough experiences");
  std::vector<const Experience*> out(batch);
  for (size_t i = 0; i < batch; ++i)
    out[i] = &buf_[rng.uniform_int(static_cast<std::uint32_t>(buf_.size()))];
  return out;
}

int greedy_argmax(std::span<const double> q) {
  int best = 0;
  for (size_t i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = static_cast<int>(i);
  return best;
}

int select_action(const Mlp& net, std::span<const double> state, double eps,
                  const ActionSpace& space, Rng& rng) {
  if (eps < 0 || eps > 1) throw std::invalid_argument("select_action: eps outside [0,1]");
  if (eps > 0 && rng.uniform() < eps)
    return static_cast<int>(rng.uniform_int(static_cast<std::uint32_t>(space.size())));
  const auto q = net.forward(state);
  return greedy_argmax(q);
}

namespace {

std::vector<int> layer_sizes(int state_size, const DqnConfig& cfg, int actions) {
  std::vector<int> sizes;
  sizes.push_back(state_size);
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(actions);
  return sizes;
}

}  // namespace

DqnAgent::DqnAgent(int state_size, ActionSpace space, const DqnConfig& cfg, std::uint64_t seed)
    : space_(space),
      cfg_(cfg),
      online_(Mlp::zeros(layer_sizes(state_size, cfg, space.size()))),
      target_(Mlp::zeros(layer_sizes(state_size, cfg, space.size()))),
      adam_(AdamState::zeros_like(online_, cfg.adam)),
      memory_(cfg.replay_capacity),
      rng_(derive_seed(seed, 0xa9e47ULL)) {
  Rng init_rng(derive_seed(seed, 0x1217ULL));
  online_ = Mlp::he_init(online_.sizes, init_rng);
  clone_into(online_, target_);
}

int DqnAgent::act(std::span<const double> state, double eps) {
  return select_action(online_, state, eps, space_, rng_);
}

std::optional<double> DqnAgent::train_step() {
  if (!memory_.can_sample(static_cast<size_t>(cfg_.batch))) return std::nullopt;
  const auto batch = memory_.sample(static_cast<size_t>(cfg_.batch), rng_);
  return train_on(batch);
}

double DqnAgent::train_on(std::span<const Experience* const> batch) {
  const int n = static_cast<int>(batch.size());
  if (n == 0) throw std::invalid_argument("train_on: empty minibatch");
  const int in = online_.input_size();
  const int out = online_.output_size();
  std::vector<double> x(static_cast<size_t>(n) * in), xn(static_cast<size_t>(n) * in);
  for (int i = 0; i < n; ++i) {
    std::copy(batch[i]->state.begin(), batch[i]->state.end(), x.begin() + static_cast<size_t>(i) * in);
    std::copy(batch[i]->next_state.begin(), batch[i]->next_state.end(),
              xn.begin() + static_cast<size_t>(i) * in);
  }
  ForwardCache target_cache;
  forward_batch(target_, xn, n, target_cache);
  ForwardCache online_cache;
  forward_batch(online_, x, n, online_cache);

  const auto& q_next = target_cache.act.back();
  const auto& q = online_cache.act.back();
  std::vector<double> dy(static_cast<size_t>(n) * out, 0.0);
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    const double* row = &q_next[static_cast<size_t>(i) * out];
    double best = row[0];
    for (int a = 1; a < out; ++a) best = std::max(best, row[a]);
    const double y = batch[i]->reward * cfg_.reward_scale + cfg_.discount * best;
    const double err = q[static_cast<size_t>(i) * out + batch[i]->action] - y;
    loss += err * err;
    dy[static_cast<size_t>(i) * out + batch[i]->action] = 2.0 * err / n;
  }
  loss /= n;
  if (!std::isfinite(loss)) {
    ++rejected_steps_;
    return loss;
  }
  Gradients grads = Gradients::zeros_like(online_);
  backward_batch(online_, online_cache, dy, grads);
  if (!adam_step(online_, grads, adam_)) ++rejected_steps_;
  return loss;
}

void DqnAgent::sync_target() {
  clone_into(online_, target_);
  ++sync_count_;
}

QTableAgent::QTableAgent(std::vector<std::array<double, 3>> edges_db, ActionSpace space,
                         const QlConfig& cfg, std::uint64_t seed)
    : edges_db_(std::move(edges_db)),
      space_(space),
      cfg_(cfg),
      rng_(derive_seed(seed, 0x7ab1eULL)) {
  if (static_cast<int>(edges_db_.size()) != space.subchannels)
    throw std::invalid_argument("QTableAgent: one edge triple per subchannel required");
}

std::uint64_t QTableAgent::key_of(std::span<const double> gains_linear, int prev_action) const {
  if (static_cast<int>(gains_linear.size()) != space_.subchannels)
    throw std::invalid_argument("QTableAgent::key_of: gain block size mismatch");
  std::uint64_t key = 0;
  for (int k = 0; k < space_.subchannels; ++k) {
    const double g_db = linear_to_db(gains_linear[k]);
    const auto& e = edges_db_[k];
    const int bin = g_db < e[0] ? 0 : g_db < e[1] ? 1 : g_db < e[2] ? 2 : 3;
    key = key * 4 + static_cast<std::uint64_t>(bin);
  }
  // prev_action in {-1 (none), 0 .. |A|-1}
  key = key * static_cast<std::uint64_t>(space_.size() + 1) +
        static_cast<std::uint64_t>(prev_action + 1);
  return key;
}

std::vector<double>& QTableAgent::row(std::uint64_t key) {
  auto it = table_.find(key);
  if (it == table_.end())
    it = table_.emplace(key, std::vector<double>(space_.size(), 0.0)).first;
  return it->second;
}

int QTableAgent::act(std::uint64_t state_key, double eps) {
  if (eps > 0 && rng_.uniform() < eps)
    return static_cast<int>(rng_.uniform_int(static_cast<std::uint32_t>(space_.size())));
  return greedy_argmax(row(state_key));
}

void QTableAgent::update(std::uint64_t s, int a, double reward, std::uint64_t s_next) {
  const auto& next_row = row(s_next);
  const double best_next = *std::max_element(next_row.begin(), next_row.end());
  auto& r = row(s);
  r[a] += cfg_.alpha * (reward * cfg_.reward_scale + cfg_.discount * best_next - r[a]);
}

double QTableAgent::q_value(std::uint64_t s, int a) const {
  auto it = table_.find(s);
  return it == table_.end() ? 0.0 : it->second.at(a);
}

}  // namespace sgnoma
