#include "sgnoma/neural_net.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sgnoma {

namespace {

// Dot product with explicit partial accumulators; the reassociation lets the
// compiler vectorize without -ffast-math.
inline double dot(const double* __restrict a, const double* __restrict x, int n) {
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, s5 = 0, s6 = 0, s7 = 0;
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 += a[i] * x[i];
    s1 += a[i + 1] * x[i + 1];
    s2 += a[i + 2] * x[i + 2];
    s3 += a[i + 3] * x[i + 3];
    s4 += a[i + 4] * x[i + 4];
    s5 += a[i + 5] * x[i + 5];
    s6 += a[i + 6] * x[i + 6];
    s7 += a[i + 7] * x[i + 7];
  }
  double s = ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
  for (; i < n; ++i) s += a[i] * x[i];
  return s;
}

inline void axpy(double alpha, const double* __restrict x, double* __restrict y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output layer");
  for (int s : sizes)
    if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
}

}  // namespace

Mlp Mlp::zeros(std::vector<int> sizes) {
  check_sizes(sizes);
  Mlp net;
  net.sizes = std::move(sizes);
  for (size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    net.w.emplace_back(static_cast<size_t>(net.sizes[l + 1]) * net.sizes[l], 0.0);
    net.b.emplace_back(net.sizes[l + 1], 0.0);
  }
  return net;
}

Mlp Mlp::he_init(std::vector<int> sizes, Rng& rng) {
  Mlp net = zeros(std::move(sizes));
  for (size_t l = 0; l < net.w.size(); ++l) {
    const double bound = std::sqrt(6.0 / net.sizes[l]);
    for (auto& v : net.w[l]) v = rng.uniform(-bound, bound);
  }
  return net;
}

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t l = 0; l < w.size(); ++l) n += w[l].size() + b[l].size();
  return n;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  ForwardCache cache;
  forward_batch(*this, x, 1, cache);
  return cache.act.back();
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (size_t l = 0; l < net.w.size(); ++l) {
    g.w.emplace_back(net.w[l].size(), 0.0);
    g.b.emplace_back(net.b[l].size(), 0.0);
  }
  return g;
}

void forward_batch(const Mlp& net, std::span<const double> x, int batch, ForwardCache& cache) {
  const int layers = net.layer_count();
  if (x.size() != static_cast<size_t>(batch) * net.input_size())
    throw std::invalid_argument("forward_batch: input size mismatch");
  cache.batch = batch;
  cache.act.resize(layers + 1);
  cache.act[0].assign(x.begin(), x.end());
  for (int l = 0; l < layers; ++l) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    const bool hidden = l + 1 < layers;
    auto& z = cache.act[l + 1];
    z.resize(static_cast<size_t>(batch) * out);
    const auto& prev = cache.act[l];
    for (int s = 0; s < batch; ++s) {
      const double* xi = &prev[static_cast<size_t>(s) * in];
      double* zo = &z[static_cast<size_t>(s) * out];
      for (int o = 0; o < out; ++o) {
        const double v = net.b[l][o] + dot(&net.w[l][static_cast<size_t>(o) * in], xi, in);
        zo[o] = hidden && v < 0 ? 0.0 : v;
      }
    }
  }
}

void backward_batch(const Mlp& net, const ForwardCache& cache,
                    std::span<const double> dy, Gradients& grads) {
  const int layers = net.layer_count();
  const int batch = cache.batch;
  if (dy.size() != static_cast<size_t>(batch) * net.output_size())
    throw std::invalid_argument("backward_batch: gradient size mismatch");
  if (cache.act.size() != static_cast<size_t>(layers) + 1)
    throw std::invalid_argument("backward_batch: forward cache missing");

  std::vector<double> delta(dy.begin(), dy.end());
  std::vector<double> next_delta;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    const auto& a_in = cache.act[l];
    const auto& a_out = cache.act[l + 1];
    // ReLU mask for hidden layers (post-activation > 0 iff pre-activation > 0)
    if (l + 1 < layers)
      for (size_t i = 0; i < delta.size(); ++i)
        if (a_out[i] <= 0) delta[i] = 0;
    for (int s = 0; s < batch; ++s) {
      const double* d = &delta[static_cast<size_t>(s) * out];
      const double* xi = &a_in[static_cast<size_t>(s) * in];
      for (int o = 0; o < out; ++o) {
        if (d[o] == 0) continue;
        axpy(d[o], xi, &grads.w[l][static_cast<size_t>(o) * in], in);
        grads.b[l][o] += d[o];
      }
    }
    if (l == 0) break;
    next_delta.assign(static_cast<size_t>(batch) * in, 0.0);
    for (int s = 0; s < batch; ++s) {
      const double* d = &delta[static_cast<size_t>(s) * out];
      double* nd = &next_delta[static_cast<size_t>(s) * in];
      for (int o = 0; o < out; ++o)
        if (d[o] != 0) axpy(d[o], &net.w[l][static_cast<size_t>(o) * in], nd, in);
    }
    delta.swap(next_delta);
  }
}

AdamState AdamState::zeros_like(const Mlp& net, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  for (size_t l = 0; l < net.w.size(); ++l) {
    s.m_w.emplace_back(net.w[l].size(), 0.0);
    s.v_w.emplace_back(net.w[l].size(), 0.0);
    s.m_b.emplace_back(net.b[l].size(), 0.0);
    s.v_b.emplace_back(net.b[l].size(), 0.0);
  }
  return s;
}

bool adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  for (size_t l = 0; l < grads.w.size(); ++l) {
    for (double g : grads.w[l])
      if (!std::isfinite(g)) return false;
    for (double g : grads.b[l])
      if (!std::isfinite(g)) return false;
  }
  state.step += 1;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      p[i] -= c.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.eps);
    }
  };
  for (size_t l = 0; l < net.w.size(); ++l) {
    update(net.w[l], grads.w[l], state.m_w[l], state.v_w[l]);
    update(net.b[l], grads.b[l], state.m_b[l], state.v_b[l]);
  }
  return true;
}

void clone_into(const Mlp& source, Mlp& target) {
  target.sizes = source.sizes;
  target.w = source.w;
  target.b = source.b;
}

namespace {

constexpr std::uint32_t kMagic = 0x4e4e4753u;  // "SGNN"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  if (!is) throw std::runtime_error("load_params: truncated header");
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

double get_f64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("load_params: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_params(const Mlp& net, std::ostream& os) {
  put_u32(os, kMagic);
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(net.sizes.size()));
  for (int s : net.sizes) put_u32(os, static_cast<std::uint32_t>(s));
  for (size_t l = 0; l < net.w.size(); ++l) {
    for (double v : net.w[l]) put_f64(os, v);
    for (double v : net.b[l]) put_f64(os, v);
  }
}

Mlp load_params(std::istream& is) {
  if (get_u32(is) != kMagic) throw std::runtime_error("load_params: bad magic");
  if (get_u32(is) != kVersion) throw std::runtime_error("load_params: unsupported version");
  const std::uint32_t n = get_u32(is);
  if (n < 2 || n > 64) throw std::runtime_error("load_params: bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) s = static_cast<int>(get_u32(is));
  Mlp net = Mlp::zeros(sizes);
  for (size_t l = 0; l < net.w.size(); ++l) {
    for (auto& v : net.w[l]) v = get_f64(is);
    for (auto& v : net.b[l]) v = get_f64(is);
  }
  return net;
}

void save_params_file(const Mlp& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  save_params(net, os);
}

Mlp load_params_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  return load_params(is);
}

}  // namespace sgnoma
