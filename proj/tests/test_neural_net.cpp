#include <doctest.h>

#include <cmath>
#include <sstream>
#include <thread>

#include "sgnoma/neural_net.hpp"

using namespace sgnoma;

namespace {

// Reference forward pass, written independently of the library kernels.
std::vector<double> naive_forward(const Mlp& net, const std::vector<double>& x) {
  std::vector<double> act = x;
  for (int l = 0; l < net.layer_count(); ++l) {
    const int in = net.sizes[l], out = net.sizes[l + 1];
    std::vector<double> next(out);
    for (int o = 0; o < out; ++o) {
      double v = net.b[l][o];
      for (int i = 0; i < in; ++i) v += net.w[l][o * in + i] * act[i];
      next[o] = (l + 1 < net.layer_count() && v < 0) ? 0.0 : v;
    }
    act = std::move(next);
  }
  return act;
}

std::vector<double> random_vec(size_t n, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// loss(x) = sum_o dy_o * net(x)_o, whose gradient backward_batch computes
double directional_output(const Mlp& net, const std::vector<double>& x,
                          const std::vector<double>& dy) {
  const auto y = naive_forward(net, x);
  double s = 0;
  for (size_t i = 0; i < y.size(); ++i) s += dy[i] * y[i];
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("neural-net");

TEST_CASE("forward basics") {
  SUBCASE("all-zero parameters give all-zero output") {
    auto net = Mlp::zeros({4, 8, 3});
    const std::vector<double> x = {1, -2, 3, 4};
    for (double v : net.forward(x)) CHECK(v == 0.0);
  }

  SUBCASE("1x1 affine chain by hand") {
    auto net = Mlp::zeros({1, 1, 1});
    net.w[0][0] = 2.0;
    net.b[0][0] = -1.0;
    net.w[1][0] = 3.0;
    net.b[1][0] = 0.5;
    // x = 2: relu(2*2 - 1) = 3, out = 3*3 + 0.5 = 9.5
    CHECK(net.forward(std::vector<double>{2.0})[0] == doctest::Approx(9.5));
    // x = 0: relu(-1) = 0, out = 0.5
    CHECK(net.forward(std::vector<double>{0.0})[0] == doctest::Approx(0.5));
  }

  SUBCASE("matches the independent reference to 1e-12") {
    Rng rng(101);
    for (const auto& sizes :
         {std::vector<int>{6, 256, 128, 64, 8}, std::vector<int>{12, 16, 4}}) {
      auto net = Mlp::he_init(sizes, rng);
      for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_vec(sizes.front(), rng);
        const auto got = net.forward(x);
        const auto want = naive_forward(net, x);
        for (size_t i = 0; i < want.size(); ++i)
          CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    auto net = Mlp::zeros({4, 2});
    ForwardCache cache;
    const std::vector<double> bad = {1, 2, 3};
    CHECK_THROWS_AS(forward_batch(net, bad, 1, cache), std::invalid_argument);
  }
}

TEST_CASE("backward") {
  SUBCASE("zero output-gradient gives zero parameter gradients") {
    Rng rng(103);
    auto net = Mlp::he_init({3, 5, 2}, rng);
    ForwardCache cache;
    const auto x = random_vec(3, rng);
    forward_batch(net, x, 1, cache);
    auto grads = Gradients::zeros_like(net);
    backward_batch(net, cache, std::vector<double>{0.0, 0.0}, grads);
    for (const auto& layer : grads.w)
      for (double g : layer) CHECK(g == 0.0);
  }

  SUBCASE("scalar quadratic network has the analytic gradient") {
    // f(w) = (w x + b), d/dw [dy * f] = dy * x
    auto net = Mlp::zeros({1, 1});
    net.w[0][0] = 0.7;
    net.b[0][0] = 0.1;
    ForwardCache cache;
    forward_batch(net, std::vector<double>{2.5}, 1, cache);
    auto grads = Gradients::zeros_like(net);
    backward_batch(net, cache, std::vector<double>{3.0}, grads);
    CHECK(grads.w[0][0] == doctest::Approx(7.5));
    CHECK(grads.b[0][0] == doctest::Approx(3.0));
  }

  SUBCASE("agrees with central finite differences on every parameter") {
    Rng rng(107);
    for (int seed_trial = 0; seed_trial < 5; ++seed_trial) {
      auto net = Mlp::he_init({4, 8, 6, 3}, rng);
      const auto x = random_vec(4, rng);
      const auto dy = random_vec(3, rng);
      ForwardCache cache;
      forward_batch(net, x, 1, cache);
      auto grads = Gradients::zeros_like(net);
      backward_batch(net, cache, dy, grads);
      const double h = 1e-5;
      for (size_t l = 0; l < net.w.size(); ++l) {
        for (size_t i = 0; i < net.w[l].size(); ++i) {
          const double save = net.w[l][i];
          net.w[l][i] = save + h;
          const double up = directional_output(net, x, dy);
          net.w[l][i] = save - h;
          const double dn = directional_output(net, x, dy);
          net.w[l][i] = save;
          const double fd = (up - dn) / (2 * h);
          CHECK(grads.w[l][i] ==
                doctest::Approx(fd).epsilon(1e-4).scale(std::max(1.0, std::abs(fd))));
        }
      }
    }
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradients leave parameters unchanged") {
    Rng rng(109);
    auto net = Mlp::he_init({2, 3, 1}, rng);
    const auto before = net.w;
    auto state = AdamState::zeros_like(net);
    CHECK(adam_step(net, Gradients::zeros_like(net), state));
    CHECK(net.w == before);
  }

  SUBCASE("constant gradient step magnitude approaches the learning rate") {
    auto net = Mlp::zeros({1, 1});
    auto state = AdamState::zeros_like(net);
    auto grads = Gradients::zeros_like(net);
    grads.w[0][0] = 0.37;  // any constant
    double prev = net.w[0][0];
    double step = 0;
    for (int i = 0; i < 200; ++i) {
      adam_step(net, grads, state);
      step = prev - net.w[0][0];
      prev = net.w[0][0];
    }
    CHECK(step == doctest::Approx(state.cfg.lr).epsilon(1e-3));
  }

  SUBCASE("non-finite gradients are rejected") {
    auto net = Mlp::zeros({1, 1});
    auto state = AdamState::zeros_like(net);
    auto grads = Gradients::zeros_like(net);
    grads.w[0][0] = std::numeric_limits<double>::quiet_NaN();
    const double before = net.w[0][0];
    CHECK_FALSE(adam_step(net, grads, state));
    CHECK(net.w[0][0] == before);
  }

  SUBCASE("minimizes a 1-D quadratic within 1e-3 in 5000 steps") {
    // minimize (w - 1)^2 by feeding its gradient; Adam's steps are bounded
    // by ~lr, so unit distance needs ~1000 steps plus the settling tail
    auto net = Mlp::zeros({1, 1});
    auto state = AdamState::zeros_like(net);
    auto grads = Gradients::zeros_like(net);
    int used = 0;
    for (; used < 5000; ++used) {
      grads.w[0][0] = 2.0 * (net.w[0][0] - 1.0);
      adam_step(net, grads, state);
      if (std::abs(net.w[0][0] - 1.0) < 1e-3) break;
    }
    CHECK(std::abs(net.w[0][0] - 1.0) < 1e-3);
    CHECK(used < 5000);
  }
}

TEST_CASE("forward is safe for concurrent readers") {
  Rng rng(131);
  auto net = Mlp::he_init({6, 32, 16, 4}, rng);
  std::vector<std::vector<double>> inputs(64);
  for (auto& x : inputs) x = random_vec(6, rng);
  std::vector<std::vector<double>> serial;
  for (const auto& x : inputs) serial.push_back(net.forward(x));
  std::vector<std::vector<double>> a(inputs.size()), b(inputs.size());
  std::thread t1([&] {
    for (size_t i = 0; i < inputs.size(); ++i) a[i] = net.forward(inputs[i]);
  });
  std::thread t2([&] {
    for (size_t i = 0; i < inputs.size(); ++i) b[i] = net.forward(inputs[i]);
  });
  t1.join();
  t2.join();
  CHECK(a == serial);
  CHECK(b == serial);
}

TEST_CASE("clone_into") {
  Rng rng(113);
  auto a = Mlp::he_init({3, 4, 2}, rng);
  auto b = Mlp::zeros({3, 4, 2});
  clone_into(a, b);
  CHECK(a.w == b.w);
  CHECK(a.b == b.b);
  const double kept = b.w[0][0];
  a.w[0][0] += 1.0;
  CHECK(b.w[0][0] == kept);
}

TEST_CASE("serialization round-trips bit-exactly") {
  Rng rng(127);
  auto net = Mlp::he_init({6, 16, 8, 4}, rng);
  std::stringstream ss;
  save_params(net, ss);
  const std::string first = ss.str();
  const auto loaded = load_params(ss);
  CHECK(loaded.sizes == net.sizes);
  CHECK(loaded.w == net.w);
  CHECK(loaded.b == net.b);
  std::stringstream ss2;
  save_params(loaded, ss2);
  CHECK(ss2.str() == first);

  SUBCASE("corrupt header is rejected") {
    std::stringstream bad("nonsense");
    CHECK_THROWS_AS(load_params(bad), std::runtime_error);
  }
}

TEST_SUITE_END();
