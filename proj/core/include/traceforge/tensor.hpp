#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "traceforge/image.hpp"

namespace traceforge::nn {

struct Shape {
  int h = 0;
  int w = 0;
  int c = 0;
  std::size_t count() const { return static_cast<std::size_t>(h) * w * c; }
  bool operator==(const Shape&) const = default;
};

/// Dense H x W x C tensor, row-major with interleaved channels.
template <typename T>
struct Tensor {
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int h_, int w_, int c_) : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, T(0)) {}

  static Tensor zeros(Shape s) { return Tensor(s.h, s.w, s.c); }

  Shape shape() const { return {h, w, c}; }
  std::size_t size() const { return v.size(); }

  T& at(int y, int x, int ch) { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  T at(int y, int x, int ch) const { return v[(static_cast<std::size_t>(y) * w + x) * c + ch]; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }
};

template <typename T>
Tensor<T> image_to_tensor(const RgbImage& img) {
  Tensor<T> t(img.height, img.width, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t.v[i] = static_cast<T>(img.pixels[i]);
  return t;
}

template <typename T>
RgbImage tensor_to_image(const Tensor<T>& t) {
  if (t.c != 3) throw std::invalid_argument("tensor_to_image: need 3 channels");
  RgbImage img(t.h, t.w);
  for (std::size_t i = 0; i < t.v.size(); ++i) img.pixels[i] = static_cast<double>(t.v[i]);
  return img;
}

namespace detail {
// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C. Backed by BLAS.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);
}  // namespace detail

}  // namespace traceforge::nn
