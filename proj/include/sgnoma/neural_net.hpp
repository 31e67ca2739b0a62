#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "sgnoma/rng.hpp"

namespace sgnoma {

// Dense feedforward Q-network: ReLU hidden layers, linear output. Weights
// are row-major [out x in]; all math in double so gradient checks against
// finite differences stay meaningful.
struct Mlp {
  std::vector<int> sizes;                // [input, hidden..., output]
  std::vector<std::vector<double>> w;    // per layer, out*in
  std::vector<std::vector<double>> b;    // per layer, out

  static Mlp zeros(std::vector<int> sizes);
  // He-uniform init scaled by fan-in, seeded for reproducibility.
  static Mlp he_init(std::vector<int> sizes, Rng& rng);

  int input_size() const { return sizes.front(); }
  int output_size() const { return sizes.back(); }
  int layer_count() const { return static_cast<int>(w.size()); }
  size_t parameter_count() const;

  std::vector<double> forward(std::span<const double> x) const;
};

// Layer activations kept for the backward pass; cache[0] is the input batch,
// cache[L] the network output, all row-major [batch x width].
struct ForwardCache {
  std::vector<std::vector<double>> act;
  int batch = 0;
};

struct Gradients {
  std::vector<std::vector<double>> w, b;
  static Gradients zeros_like(const Mlp& net);
};

void forward_batch(const Mlp& net, std::span<const double> x, int batch, ForwardCache& cache);

// Reverse-mode gradients of sum_b dy[b] . output[b] w.r.t. every parameter.
// dy is row-major [batch x output]; grads are accumulated from zero.
void backward_batch(const Mlp& net, const ForwardCache& cache,
                    std::span<const double> dy, Gradients& grads);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
  long step = 0;
  AdamConfig cfg;
  static AdamState zeros_like(const Mlp& net, AdamConfig cfg = {});
};

// Standard Adam update with bias correction. Returns false (and leaves the
// parameters untouched) if any gradient entry is non-finite.
bool adam_step(Mlp& net, const Gradients& grads, AdamState& state);

// Deep copy; later mutation of source does not affect target.
void clone_into(const Mlp& source, Mlp& target);

// Little-endian binary format: magic, version, layer-size header, then per
// layer the weight matrix and bias vector as 64-bit floats.
void save_params(const Mlp& net, std::ostream& os);
Mlp load_params(std::istream& is);
void save_params_file(const Mlp& net, const std::string& path);
Mlp load_params_file(const std::string& path);

}  // namespace sgnoma
