#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "traceforge/models.hpp"
#include "traceforge/rng.hpp"
#include "traceforge/synthcam.hpp"

namespace tfu {

using traceforge::Rng;

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

/// Central finite differences of a scalar functional over a parameter vector.
/// Returns the worst relative error against the provided analytic gradient,
/// checked on `n_check` evenly spread parameters.
inline double gradcheck(std::vector<double>& params, const std::function<double()>& loss,
                        const std::vector<double>& analytic, std::size_t n_check = 0,
                        double h = 1e-5) {
  const std::size_t n = params.size();
  if (n_check == 0 || n_check > n) n_check = n;
  const std::size_t stride = n / n_check;
  double worst = 0.0;
  for (std::size_t k = 0; k < n_check; ++k) {
    const std::size_t i = k * stride;
    const double save = params[i];
    const double step = h * std::max(1.0, std::abs(save));
    params[i] = save + step;
    const double lp = loss();
    params[i] = save - step;
    const double lm = loss();
    params[i] = save;
    const double fd = (lp - lm) / (2.0 * step);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

inline traceforge::nn::Tensor<double> random_tensor(int h, int w, int c, Rng& rng, double lo = 0.1,
                                                    double hi = 0.9) {
  traceforge::nn::Tensor<double> t(h, w, c);
  for (auto& v : t.v) v = rng.uniform(lo, hi);
  return t;
}

inline traceforge::RgbImage random_image(int h, int w, Rng& rng, double lo = 0.05, double hi = 0.95) {
  traceforge::RgbImage img(h, w);
  for (auto& v : img.pixels) v = rng.uniform(lo, hi);
  return img;
}

/// Plain Jacobi eigensolver for small symmetric matrices; the independent
/// oracle for the spectral statistics.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
    }
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-18) continue;
        const double app = a[p * n + p], aqq = a[q * n + q];
        const double theta = 0.5 * (aqq - app) / apq;
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = a[i * n + i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Tiny two-profile dataset for fast training tests. The profiles differ in
/// noise and gamma so even a few epochs separate them.
inline traceforge::synthcam::Dataset tiny_dataset(int train_per = 24, int val_per = 8,
                                                  int test_per = 8, std::uint64_t seed = 99) {
  using namespace traceforge;
  synthcam::DatasetConfig cfg;
  cfg.profiles_seen.clear();
  synthcam::CameraProfile a;
  a.id = 0;
  a.noise_std = 0.002;
  a.gamma = 1.0;
  synthcam::CameraProfile b;
  b.id = 1;
  b.noise_std = 0.03;
  b.gamma = 0.8;
  b.demosaic_kernel = {0, 0.1, 0, 0.1, 0.6, 0.1, 0, 0.1, 0};
  cfg.profiles_seen = {a, b};
  cfg.profiles_unseen.clear();
  cfg.counts = {train_per, val_per, test_per};
  cfg.base_height = 128;
  cfg.base_width = 128;
  return synthcam::generate_dataset(cfg, RngSeed{seed});
}

/// Miniature architectures with the full layer structure at 8x8 input.
inline traceforge::nets::ClassifierArch mini_classifier_arch() {
  traceforge::nets::ClassifierArch a;
  a.input = 8;
  a.channels = {4, 6, 6, 8};
  a.pools = {2, 2, 1, 2};
  a.hidden = 10;
  return a;
}

inline traceforge::nets::SiameseArch mini_siamese_arch() {
  traceforge::nets::SiameseArch a;
  a.input = 8;
  a.channels = {4, 6, 8};
  a.pools = {2, 2, 1};
  a.embed_dim = 12;
  a.head_hidden = 8;
  return a;
}

inline traceforge::nets::GeneratorArch mini_generator_arch() {
  traceforge::nets::GeneratorArch a;
  a.channels = 6;
  a.blocks = 2;
  return a;
}

}  // namespace tfu
