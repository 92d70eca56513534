#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "traceforge/nn.hpp"

using namespace traceforge;
using nn::Act;
using nn::Tensor;

namespace {

// direct convolution as the oracle for the im2col + GEMM path
Tensor<double> naive_conv(const Tensor<double>& x, const double* w, const double* b, int k,
                          int cout, bool relu) {
  const int pad = (k - 1) / 2;
  Tensor<double> y(x.h, x.w, cout);
  for (int oy = 0; oy < x.h; ++oy) {
    for (int ox = 0; ox < x.w; ++ox) {
      for (int co = 0; co < cout; ++co) {
        double acc = b[co];
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int sy = oy + ky - pad, sx = ox + kx - pad;
            if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
            for (int ci = 0; ci < x.c; ++ci) {
              acc += x.at(sy, sx, ci) * w[((ky * k + kx) * x.c + ci) * cout + co];
            }
          }
        }
        y.at(oy, ox, co) = relu && acc < 0 ? 0.0 : acc;
      }
    }
  }
  return y;
}

double net_loss(const nn::Net<double>& net, const Tensor<double>& x) {
  const Tensor<double> y = net.forward(x);
  double loss = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    loss += (0.3 + 0.01 * static_cast<double>(i % 7)) * y.v[i] * y.v[i];
  }
  return loss;
}

// analytic gradient of net_loss with respect to the parameters
std::vector<double> net_loss_grad(const nn::Net<double>& net, const Tensor<double>& x) {
  nn::Trace<double> tr;
  const Tensor<double> y = net.forward(x, &tr);
  Tensor<double> dy(y.h, y.w, y.c);
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    dy.v[i] = 2.0 * (0.3 + 0.01 * static_cast<double>(i % 7)) * y.v[i];
  }
  std::vector<double> grads(net.param_count(), 0.0);
  net.backward(dy, tr, &grads);
  return grads;
}

}  // namespace

TEST_CASE("conv forward matches the direct convolution") {
  Rng rng(10);
  for (int rep = 0; rep < 5; ++rep) {
    const int k = rep % 2 == 0 ? 3 : 5;
    const int cin = rng.uniform_int(1, 4);
    const int cout = rng.uniform_int(1, 5);
    nn::Conv<double> conv(k, cin, cout, rep % 2 == 0 ? Act::relu : Act::none);
    std::vector<double> p(conv.param_count());
    for (auto& v : p) v = rng.normal(0.0, 0.5);
    const Tensor<double> x = tfu::random_tensor(rng.uniform_int(4, 9), rng.uniform_int(4, 9), cin,
                                                rng, -1.0, 1.0);
    const Tensor<double> got = conv.forward(x, p.data(), nullptr);
    const Tensor<double> want = naive_conv(x, p.data(), p.data() + conv.weight_count(), k, cout,
                                           rep % 2 == 0);
    REQUIRE(got.v.size() == want.v.size());
    for (std::size_t i = 0; i < got.v.size(); ++i) {
      CHECK(tfu::rel_err(got.v[i], want.v[i]) < 1e-12);
    }
  }
}

TEST_CASE("maxpool picks window maxima and routes gradients") {
  Tensor<double> x(4, 4, 1);
  for (int i = 0; i < 16; ++i) x.v[i] = i;
  nn::MaxPool<double> pool(2);
  std::vector<Tensor<double>> aux;
  const Tensor<double> y = pool.forward(x, nullptr, &aux);
  REQUIRE(y.v.size() == 4);
  CHECK(y.v[0] == 5.0);
  CHECK(y.v[1] == 7.0);
  CHECK(y.v[2] == 13.0);
  CHECK(y.v[3] == 15.0);
  Tensor<double> dy(2, 2, 1);
  dy.v = {1.0, 2.0, 3.0, 4.0};
  const Tensor<double> dx = pool.backward(dy, x, y, aux, nullptr, nullptr);
  CHECK(dx.v[5] == 1.0);
  CHECK(dx.v[7] == 2.0);
  CHECK(dx.v[13] == 3.0);
  CHECK(dx.v[15] == 4.0);
  CHECK(dx.v[0] == 0.0);
}

TEST_CASE("layer stack gradients match finite differences") {
  Rng rng(11);
  nn::Net<double> net;
  net.add(std::make_unique<nn::HighPass<double>>(true));
  net.add(std::make_unique<nn::Conv<double>>(3, 6, 4, Act::relu));
  net.add(std::make_unique<nn::MaxPool<double>>(2));
  net.add(std::make_unique<nn::Residual<double>>(4));
  net.add(std::make_unique<nn::Conv<double>>(3, 4, 3, Act::none));
  net.add(std::make_unique<nn::Dense<double>>(4 * 4 * 3, 5, Act::relu));
  net.add(std::make_unique<nn::Dense<double>>(5, 3, Act::none));
  net.finalize({8, 8, 3}, rng);

  const Tensor<double> x = tfu::random_tensor(8, 8, 3, rng, 0.2, 0.8);
  const std::vector<double> analytic = net_loss_grad(net, x);
  const double worst =
      tfu::gradcheck(net.params(), [&]() { return net_loss(net, x); }, analytic, 300);
  CHECK(worst < 1e-3);
}

TEST_CASE("input gradients match finite differences") {
  Rng rng(12);
  nn::Net<double> net;
  net.add(std::make_unique<nn::Conv<double>>(3, 3, 5, Act::relu));
  net.add(std::make_unique<nn::Residual<double>>(5));
  net.add(std::make_unique<nn::Conv<double>>(3, 5, 2, Act::none));
  net.finalize({6, 6, 3}, rng);

  Tensor<double> x = tfu::random_tensor(6, 6, 3, rng, 0.1, 0.9);
  nn::Trace<double> tr;
  Tensor<double> y = net.forward(x, &tr);
  Tensor<double> dy(y.h, y.w, y.c);
  for (std::size_t i = 0; i < dy.v.size(); ++i) dy.v[i] = 2.0 * y.v[i];
  const Tensor<double> dx = net.backward(dy, tr, nullptr);

  auto loss = [&]() {
    const Tensor<double> out = net.forward(x);
    double l = 0.0;
    for (double v : out.v) l += v * v;
    return l;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < x.v.size(); i += 7) {
    const double save = x.v[i];
    x.v[i] = save + 1e-6;
    const double lp = loss();
    x.v[i] = save - 1e-6;
    const double lm = loss();
    x.v[i] = save;
    const double fd = (lp - lm) / 2e-6;
    worst = std::max(worst, std::abs(fd - dx.v[i]) / std::max({std::abs(fd), std::abs(dx.v[i]), 1e-6}));
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("clamp passes gradients straight through") {
  nn::Clamp01<double> clamp;
  Tensor<double> x(1, 1, 3);
  x.v = {-0.5, 0.5, 1.5};
  const Tensor<double> y = clamp.forward(x, nullptr, nullptr);
  CHECK(y.v[0] == 0.0);
  CHECK(y.v[1] == 0.5);
  CHECK(y.v[2] == 1.0);
  Tensor<double> dy(1, 1, 3);
  dy.v = {1.0, 2.0, 3.0};
  const Tensor<double> dx = clamp.backward(dy, x, y, {}, nullptr, nullptr);
  CHECK(dx.v == dy.v);
}

TEST_CASE("adam minimizes a convex bowl") {
  std::vector<float> p{5.0f, -3.0f, 2.0f};
  nn::Adam<float> adam(p.size());
  std::vector<float> g(p.size());
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2.0f * (p[i] - 1.0f);
    adam.step(p, g, 0.01);
  }
  for (float v : p) CHECK(std::abs(v - 1.0f) < 1e-2);
}

TEST_CASE("softmax cross entropy value and gradient") {
  Tensor<double> logits(1, 1, 3);
  logits.v = {1.0, 2.0, 0.5};
  Tensor<double> dl;
  const double loss = nn::softmax_ce(logits, 1, 0.0, &dl);
  const auto p = nn::softmax(logits);
  CHECK(tfu::rel_err(loss, -std::log(p[1])) < 1e-12);
  CHECK(tfu::rel_err(dl.v[0], p[0]) < 1e-12);
  CHECK(tfu::rel_err(dl.v[1], p[1] - 1.0) < 1e-12);
  double sum = 0.0;
  for (double v : p) sum += v;
  CHECK(tfu::rel_err(sum, 1.0) < 1e-12);
}
