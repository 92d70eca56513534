#pragma once

#include <cmath>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "traceforge/rng.hpp"
#include "traceforge/tensor.hpp"

namespace traceforge::nn {

enum class Act { none, relu };

template <typename T>
struct Trace {
  // acts[i] is the input of layer i; acts.back() is the network output.
  std::vector<Tensor<T>> acts;
  // Per-layer extras (pool argmax indices, residual branch activations).
  std::vector<std::vector<Tensor<T>>> aux;
};

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t count = 0;
  std::vector<int> shape;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::size_t param_count() const { return 0; }
  virtual void init(T* /*p*/, Rng& /*rng*/) const {}
  virtual Shape out_shape(Shape in) const = 0;
  virtual std::string kind() const = 0;
  virtual void param_blocks(const std::string& /*prefix*/, std::size_t /*offset*/,
                            std::vector<ParamBlock>& /*out*/) const {}

  virtual Tensor<T> forward(const Tensor<T>& x, const T* p, std::vector<Tensor<T>>* aux) const = 0;
  /// Returns dL/dx. Accumulates parameter gradients into dp when non-null.
  virtual Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& y,
                             const std::vector<Tensor<T>>& aux, const T* p, T* dp) const = 0;
};

namespace detail {

template <typename T>
inline void apply_bias_act(Tensor<T>& y, const T* bias, int cout, Act act) {
  const std::size_t pixels = static_cast<std::size_t>(y.h) * y.w;
  T* d = y.data();
  if (act == Act::relu) {
    for (std::size_t i = 0; i < pixels; ++i, d += cout) {
      for (int co = 0; co < cout; ++co) {
        const T v = d[co] + bias[co];
        d[co] = v > T(0) ? v : T(0);
      }
    }
  } else {
    for (std::size_t i = 0; i < pixels; ++i, d += cout) {
      for (int co = 0; co < cout; ++co) d[co] += bias[co];
    }
  }
}

// col layout: [H*W rows, k*k*cin columns], column index = (ky*k + kx)*cin + ci.
// Only padding slots are zeroed; every interior slot is overwritten.
template <typename T>
void im2col(const Tensor<T>& x, int k, T* col) {
  const int h = x.h, w = x.w, cin = x.c, pad = (k - 1) / 2;
  const std::size_t krow = static_cast<std::size_t>(k) * k * cin;
  for (int oy = 0; oy < h; ++oy) {
    for (int ky = 0; ky < k; ++ky) {
      const int sy = oy + ky - pad;
      if (sy < 0 || sy >= h) {
        // whole (ky, *) stripe of this output row reads out of bounds
        for (int kx = 0; kx < k; ++kx) {
          T* dst = col + static_cast<std::size_t>(oy) * w * krow +
                   (static_cast<std::size_t>(ky) * k + kx) * cin;
          for (int ox = 0; ox < w; ++ox, dst += krow) std::memset(dst, 0, sizeof(T) * cin);
        }
        continue;
      }
      for (int kx = 0; kx < k; ++kx) {
        const int x0 = kx - pad < 0 ? pad - kx : 0;
        const int x1 = w - 1 + pad - kx >= w ? w - 1 : w - 1 + pad - kx;
        T* dst = col + static_cast<std::size_t>(oy) * w * krow +
                 (static_cast<std::size_t>(ky) * k + kx) * cin;
        for (int ox = 0; ox < x0; ++ox, dst += krow) std::memset(dst, 0, sizeof(T) * cin);
        const T* src = x.data() + (static_cast<std::size_t>(sy) * w + (x0 + kx - pad)) * cin;
        for (int ox = x0; ox <= x1; ++ox, dst += krow, src += cin) {
          std::memcpy(dst, src, sizeof(T) * cin);
        }
        for (int ox = x1 + 1; ox < w; ++ox, dst += krow) std::memset(dst, 0, sizeof(T) * cin);
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int k, Tensor<T>& dx) {
  const int h = dx.h, w = dx.w, cin = dx.c, pad = (k - 1) / 2;
  const std::size_t krow = static_cast<std::size_t>(k) * k * cin;
  for (int oy = 0; oy < h; ++oy) {
    for (int ky = 0; ky < k; ++ky) {
      const int sy = oy + ky - pad;
      if (sy < 0 || sy >= h) continue;
      for (int kx = 0; kx < k; ++kx) {
        const int x0 = kx - pad < 0 ? pad - kx : 0;
        const int x1 = w - 1 + pad - kx >= w ? w - 1 : w - 1 + pad - kx;
        if (x0 > x1) continue;
        T* dst = dx.data() + (static_cast<std::size_t>(sy) * w + (x0 + kx - pad)) * cin;
        const T* src = col + (static_cast<std::size_t>(oy) * w + x0) * krow +
                       (static_cast<std::size_t>(ky) * k + kx) * cin;
        for (int ox = x0; ox <= x1; ++ox) {
          for (int ci = 0; ci < cin; ++ci) dst[ci] += src[ci];
          dst += cin;
          src += krow;
        }
      }
    }
  }
}

template <typename T, int Slot = 0>
std::vector<T>& scratch_buffer(std::size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace detail

/// k x k convolution, stride 1, zero padding (k-1)/2 so spatial size is kept.
/// Weight layout: [(ky*k + kx)*cin + ci, cout]; bias per output channel.
template <typename T>
class Conv : public Layer<T> {
 public:
  Conv(int k, int cin, int cout, Act act) : k_(k), cin_(cin), cout_(cout), act_(act) {}

  int k() const { return k_; }
  int cin() const { return cin_; }
  int cout() const { return cout_; }
  std::size_t weight_count() const { return static_cast<std::size_t>(k_) * k_ * cin_ * cout_; }
  std::size_t param_count() const override { return weight_count() + cout_; }

  void init(T* p, Rng& rng) const override {
    const double std = std::sqrt(2.0 / (static_cast<double>(k_) * k_ * cin_));
    for (std::size_t i = 0; i < weight_count(); ++i) p[i] = static_cast<T>(rng.normal(0.0, std));
    for (int i = 0; i < cout_; ++i) p[weight_count() + i] = T(0);
  }

  Shape out_shape(Shape in) const override { return {in.h, in.w, cout_}; }
  std::string kind() const override { return "conv"; }

  void param_blocks(const std::string& prefix, std::size_t offset,
                    std::vector<ParamBlock>& out) const override {
    out.push_back({prefix + ".weight", offset, weight_count(), {k_, k_, cin_, cout_}});
    out.push_back({prefix + ".bias", offset + weight_count(), static_cast<std::size_t>(cout_), {cout_}});
  }

  Tensor<T> forward(const Tensor<T>& x, const T* p, std::vector<Tensor<T>>*) const override {
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    const int krow = k_ * k_ * cin_;
    std::vector<T>& col = detail::scratch_buffer<T>(hw * krow);
    detail::im2col(x, k_, col.data());
    Tensor<T> y(x.h, x.w, cout_);
    nn::detail::gemm(false, false, static_cast<int>(hw), cout_, krow, T(1), col.data(), krow, p,
                     cout_, T(0), y.data(), cout_);
    detail::apply_bias_act(y, p + weight_count(), cout_, act_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& y,
                     const std::vector<Tensor<T>>&, const T* p, T* dp) const override {
    const std::size_t hw = static_cast<std::size_t>(x.h) * x.w;
    const int krow = k_ * k_ * cin_;

    // dz = dy masked by the activation
    Tensor<T> dz = dy;
    if (act_ == Act::relu) {
      for (std::size_t i = 0; i < dz.v.size(); ++i) {
        if (y.v[i] <= T(0)) dz.v[i] = T(0);
      }
    }

    if (dp != nullptr) {
      std::vector<T>& col = detail::scratch_buffer<T>(hw * krow);
      detail::im2col(x, k_, col.data());
      // dW += col^T * dz
      nn::detail::gemm(true, false, krow, cout_, static_cast<int>(hw), T(1), col.data(), krow,
                       dz.data(), cout_, T(1), dp, cout_);
      T* db = dp + weight_count();
      const T* z = dz.data();
      for (std::size_t i = 0; i < hw; ++i, z += cout_) {
        for (int co = 0; co < cout_; ++co) db[co] += z[co];
      }
    }

    // dcol = dz * W^T, then scatter back to the input grid
    std::vector<T>& dcol = detail::scratch_buffer<T, 1>(hw * krow);
    nn::detail::gemm(false, true, static_cast<int>(hw), krow, cout_, T(1), dz.data(), cout_, p,
                     cout_, T(0), dcol.data(), krow);
    Tensor<T> dx(x.h, x.w, cin_);
    detail::col2im_add(dcol.data(), k_, dx);
    return dx;
  }

 private:
  int k_, cin_, cout_;
  Act act_;
};

/// Fully connected layer on the flattened input.
template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(int in_dim, int out_dim, Act act) : in_(in_dim), out_(out_dim), act_(act) {}

  std::size_t param_count() const override {
    return static_cast<std::size_t>(in_) * out_ + out_;
  }

  void init(T* p, Rng& rng) const override {
    const double std = std::sqrt(2.0 / in_);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in_) * out_; ++i) {
      p[i] = static_cast<T>(rng.normal(0.0, std));
    }
    for (int i = 0; i < out_; ++i) p[static_cast<std::size_t>(in_) * out_ + i] = T(0);
  }

  Shape out_shape(Shape in) const override {
    if (static_cast<std::size_t>(in_) != in.count()) {
      throw std::invalid_argument("dense: input size mismatch");
    }
    return {1, 1, out_};
  }
  std::string kind() const override { return "dense"; }

  void param_blocks(const std::string& prefix, std::size_t offset,
                    std::vector<ParamBlock>& out) const override {
    out.push_back({prefix + ".weight", offset, static_cast<std::size_t>(in_) * out_, {in_, out_}});
    out.push_back({prefix + ".bias", offset + static_cast<std::size_t>(in_) * out_,
                   static_cast<std::size_t>(out_), {out_}});
  }

  Tensor<T> forward(const Tensor<T>& x, const T* p, std::vector<Tensor<T>>*) const override {
    Tensor<T> y(1, 1, out_);
    nn::detail::gemm(false, false, 1, out_, in_, T(1), x.data(), in_, p, out_, T(0), y.data(), out_);
    detail::apply_bias_act(y, p + static_cast<std::size_t>(in_) * out_, out_, act_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>& y,
                     const std::vector<Tensor<T>>&, const T* p, T* dp) const override {
    Tensor<T> dz = dy;
    if (act_ == Act::relu) {
      for (int i = 0; i < out_; ++i) {
        if (y.v[i] <= T(0)) dz.v[i] = T(0);
      }
    }
    if (dp != nullptr) {
      // dW += x^T (as column) * dz (as row)
      nn::detail::gemm(true, false, in_, out_, 1, T(1), x.data(), in_, dz.data(), out_, T(1), dp,
                       out_);
      T* db = dp + static_cast<std::size_t>(in_) * out_;
      for (int i = 0; i < out_; ++i) db[i] += dz.v[i];
    }
    Tensor<T> dx(x.h, x.w, x.c);
    nn::detail::gemm(false, true, 1, in_, out_, T(1), dz.data(), out_, p, out_, T(0), dx.data(),
                     in_);
    return dx;
  }

 private:
  int in_, out_;
  Act act_;
};

/// Non-overlapping k x k max pooling; input dimensions must be divisible by k.
template <typename T>
class MaxPool : public Layer<T> {
 public:
  explicit MaxPool(int k) : k_(k) {}

  Shape out_shape(Shape in) const override {
    if (in.h % k_ != 0 || in.w % k_ != 0) throw std::invalid_argument("maxpool: size not divisible");
    return {in.h / k_, in.w / k_, in.c};
  }
  std::string kind() const override { return "maxpool"; }

  Tensor<T> forward(const Tensor<T>& x, const T*, std::vector<Tensor<T>>* aux) const override {
    const int oh = x.h / k_, ow = x.w / k_, c = x.c;
    Tensor<T> y(oh, ow, c);
    Tensor<T> idx(oh, ow, c);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ch = 0; ch < c; ++ch) {
          T best = x.at(oy * k_, ox * k_, ch);
          std::size_t best_i =
              (static_cast<std::size_t>(oy) * k_ * x.w + static_cast<std::size_t>(ox) * k_) * c + ch;
          for (int dy = 0; dy < k_; ++dy) {
            for (int dx = 0; dx < k_; ++dx) {
              const std::size_t i =
                  (static_cast<std::size_t>(oy * k_ + dy) * x.w + (ox * k_ + dx)) * c + ch;
              if (x.v[i] > best) {
                best = x.v[i];
                best_i = i;
              }
            }
          }
          y.at(oy, ox, ch) = best;
          idx.at(oy, ox, ch) = static_cast<T>(best_i);
        }
      }
    }
    if (aux) aux->push_back(std::move(idx));
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>&,
                     const std::vector<Tensor<T>>& aux, const T*, T*) const override {
    Tensor<T> dx(x.h, x.w, x.c);
    const Tensor<T>& idx = aux.at(0);
    for (std::size_t i = 0; i < dy.v.size(); ++i) {
      dx.v[static_cast<std::size_t>(idx.v[i])] += dy.v[i];
    }
    return dx;
  }

 private:
  int k_;
};

/// Fixed 5x5 second-derivative residual filter applied per channel, the
/// classic front end that suppresses content and keeps processing traces.
/// With augment=true the raw channels are appended after the residuals.
template <typename T>
class HighPass : public Layer<T> {
 public:
  explicit HighPass(bool augment) : augment_(augment) {}

  static constexpr double kKernel[25] = {
      -1, 2,  -2,  2,  -1,  //
      2,  -6, 8,   -6, 2,   //
      -2, 8,  -12, 8,  -2,  //
      2,  -6, 8,   -6, 2,   //
      -1, 2,  -2,  2,  -1,
  };
  static constexpr double kScale = 1.0 / 12.0;

  Shape out_shape(Shape in) const override { return {in.h, in.w, augment_ ? 2 * in.c : in.c}; }
  std::string kind() const override { return "highpass"; }

  Tensor<T> forward(const Tensor<T>& x, const T*, std::vector<Tensor<T>>*) const override {
    const int cin = x.c;
    Tensor<T> y(x.h, x.w, augment_ ? 2 * cin : cin);
    correlate(x, y, /*dst_offset=*/0);
    if (augment_) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          for (int ch = 0; ch < cin; ++ch) y.at(yy, xx, cin + ch) = x.at(yy, xx, ch);
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>&,
                     const std::vector<Tensor<T>>&, const T*, T*) const override {
    const int cin = x.c;
    Tensor<T> dx(x.h, x.w, cin);
    // The kernel is symmetric under 180 degree rotation, so the adjoint of the
    // correlation is the same correlation.
    correlate_adjoint(dy, dx);
    if (augment_) {
      for (int yy = 0; yy < x.h; ++yy) {
        for (int xx = 0; xx < x.w; ++xx) {
          for (int ch = 0; ch < cin; ++ch) dx.at(yy, xx, ch) += dy.at(yy, xx, cin + ch);
        }
      }
    }
    return dx;
  }

 private:
  void correlate(const Tensor<T>& x, Tensor<T>& y, int dst_offset) const {
    const int h = x.h, w = x.w, cin = x.c;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        for (int ch = 0; ch < cin; ++ch) {
          double acc = 0.0;
          for (int ky = 0; ky < 5; ++ky) {
            const int sy = yy + ky - 2;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < 5; ++kx) {
              const int sx = xx + kx - 2;
              if (sx < 0 || sx >= w) continue;
              acc += kKernel[ky * 5 + kx] * static_cast<double>(x.at(sy, sx, ch));
            }
          }
          y.at(yy, xx, dst_offset + ch) = static_cast<T>(acc * kScale);
        }
      }
    }
  }

  void correlate_adjoint(const Tensor<T>& dy, Tensor<T>& dx) const {
    const int h = dx.h, w = dx.w, cin = dx.c;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        for (int ch = 0; ch < cin; ++ch) {
          double acc = 0.0;
          for (int ky = 0; ky < 5; ++ky) {
            const int sy = yy + ky - 2;
            if (sy < 0 || sy >= h) continue;
            for (int kx = 0; kx < 5; ++kx) {
              const int sx = xx + kx - 2;
              if (sx < 0 || sx >= w) continue;
              acc += kKernel[ky * 5 + kx] * static_cast<double>(dy.at(sy, sx, ch));
            }
          }
          dx.at(yy, xx, ch) += static_cast<T>(acc * kScale);
        }
      }
    }
  }

  bool augment_;
};

/// Two same-width convolutions with ReLU plus an identity skip connection.
template <typename T>
class Residual : public Layer<T> {
 public:
  explicit Residual(int channels)
      : conv1_(3, channels, channels, Act::relu), conv2_(3, channels, channels, Act::relu) {}

  std::size_t param_count() const override {
    return conv1_.param_count() + conv2_.param_count();
  }

  void init(T* p, Rng& rng) const override {
    conv1_.init(p, rng);
    // The second conv starts near zero so the block is close to the identity.
    // Exact zeros would pin its ReLU on the kink and freeze the branch.
    T* p2 = p + conv1_.param_count();
    conv2_.init(p2, rng);
    for (std::size_t i = 0; i < conv2_.param_count(); ++i) p2[i] *= T(0.01);
  }

  Shape out_shape(Shape in) const override { return in; }
  std::string kind() const override { return "resblock"; }

  void param_blocks(const std::string& prefix, std::size_t offset,
                    std::vector<ParamBlock>& out) const override {
    conv1_.param_blocks(prefix + ".conv1", offset, out);
    conv2_.param_blocks(prefix + ".conv2", offset + conv1_.param_count(), out);
  }

  Tensor<T> forward(const Tensor<T>& x, const T* p, std::vector<Tensor<T>>* aux) const override {
    Tensor<T> h1 = conv1_.forward(x, p, nullptr);
    Tensor<T> h2 = conv2_.forward(h1, p + conv1_.param_count(), nullptr);
    Tensor<T> y = h2;
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += x.v[i];
    if (aux) {
      aux->push_back(std::move(h1));
      aux->push_back(std::move(h2));
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>& x, const Tensor<T>&,
                     const std::vector<Tensor<T>>& aux, const T* p, T* dp) const override {
    const Tensor<T>& h1 = aux.at(0);
    const Tensor<T>& h2 = aux.at(1);
    Tensor<T> dh1 = conv2_.backward(dy, h1, h2, {}, p + conv1_.param_count(),
                                    dp ? dp + conv1_.param_count() : nullptr);
    Tensor<T> dx = conv1_.backward(dh1, x, h1, {}, p, dp);
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
    return dx;
  }

 private:
  Conv<T> conv1_;
  Conv<T> conv2_;
};

/// Clamp to [0,1] with a straight-through gradient. Keeps training gradients
/// alive at saturated pixels; forward output equals a hard clamp (and hence a
/// final ReLU composed with the upper clamp).
template <typename T>
class Clamp01 : public Layer<T> {
 public:
  Shape out_shape(Shape in) const override { return in; }
  std::string kind() const override { return "clamp01"; }

  Tensor<T> forward(const Tensor<T>& x, const T*, std::vector<Tensor<T>>*) const override {
    Tensor<T> y = x;
    for (T& v : y.v) v = v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, const Tensor<T>&, const Tensor<T>&,
                     const std::vector<Tensor<T>>&, const T*, T*) const override {
    return dy;
  }
};

/// A feed-forward stack of layers with one flat parameter vector.
template <typename T>
class Net {
 public:
  Net() = default;

  Net<T>& add(std::unique_ptr<Layer<T>> layer) {
    layers_.push_back(std::shared_ptr<const Layer<T>>(std::move(layer)));
    return *this;
  }

  void finalize(Shape in_shape, Rng& rng) {
    in_shape_ = in_shape;
    Shape s = in_shape;
    offsets_.clear();
    std::size_t total = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      offsets_.push_back(total);
      total += layers_[i]->param_count();
      s = layers_[i]->out_shape(s);
    }
    out_shape_ = s;
    params_.assign(total, T(0));
    blocks_.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->init(params_.data() + offsets_[i], rng);
      layers_[i]->param_blocks("layer" + std::to_string(i) + "." + layers_[i]->kind(), offsets_[i],
                               blocks_);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Trace<T>* tr = nullptr) const {
    if (x.shape().count() == 0) throw std::invalid_argument("net: empty input");
    if (tr) {
      tr->acts.clear();
      tr->aux.assign(layers_.size(), {});
      tr->acts.push_back(x);
      for (std::size_t i = 0; i < layers_.size(); ++i) {
        tr->acts.push_back(
            layers_[i]->forward(tr->acts.back(), params_.data() + offsets_[i], &tr->aux[i]));
      }
      return tr->acts.back();
    }
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      cur = layers_[i]->forward(cur, params_.data() + offsets_[i], nullptr);
    }
    return cur;
  }

  /// Backpropagates dL/d(output); returns dL/d(input). Parameter gradients
  /// are accumulated into *dparams when provided (must have param_count()).
  Tensor<T> backward(const Tensor<T>& dout, const Trace<T>& tr, std::vector<T>* dparams) const {
    Tensor<T> d = dout;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      T* dp = dparams ? dparams->data() + offsets_[i] : nullptr;
      d = layers_[i]->backward(d, tr.acts[i], tr.acts[i + 1], tr.aux[i],
                               params_.data() + offsets_[i], dp);
    }
    return d;
  }

  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  Shape in_shape() const { return in_shape_; }
  Shape output_shape() const { return out_shape_; }
  std::size_t layer_count() const { return layers_.size(); }
  const Layer<T>& layer(std::size_t i) const { return *layers_[i]; }
  std::size_t layer_offset(std::size_t i) const { return offsets_[i]; }

 private:
  // layers are immutable once built (parameters live in params_), so copies
  // of a net share the layer descriptors and duplicate only the parameters
  std::vector<std::shared_ptr<const Layer<T>>> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<T> params_;
  std::vector<ParamBlock> blocks_;
  Shape in_shape_{};
  Shape out_shape_{};
};

/// Adaptive moment optimizer.
template <typename T>
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, T(0)), v_(n, T(0)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<T>& params, const std::vector<T>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grads[i]);
      m_[i] = static_cast<T>(beta1_ * m_[i] + (1.0 - beta1_) * g);
      v_[i] = static_cast<T>(beta2_ * v_[i] + (1.0 - beta2_) * g * g);
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
    }
  }

 private:
  std::vector<T> m_, v_;
  long t_ = 0;
  double beta1_, beta2_, eps_;
};

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// -log(sigmoid(t)) evaluated stably.
inline double softplus_neg(double t) { return t > 0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t)); }

/// Softmax probabilities of a logit vector.
template <typename T>
std::vector<double> softmax(const Tensor<T>& logits) {
  double mx = logits.v.empty() ? 0.0 : static_cast<double>(logits.v[0]);
  for (const T& v : logits.v) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> p(logits.v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits.v[i]) - mx);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

/// Cross-entropy -log p_k from logits. Gradient (softmax - onehot) is written
/// into *dlogits scaled by `scale` when provided. The reported value is capped
/// at -log(log_eps) when log_eps > 0; the gradient is the exact CE gradient.
template <typename T>
double softmax_ce(const Tensor<T>& logits, int k, double log_eps, Tensor<T>* dlogits,
                  double scale = 1.0) {
  const std::vector<double> p = softmax(logits);
  double loss = -std::log(std::max(p[k], 1e-300));
  if (log_eps > 0.0) loss = std::min(loss, -std::log(log_eps));
  if (dlogits) {
    *dlogits = Tensor<T>(logits.h, logits.w, logits.c);
    for (std::size_t i = 0; i < p.size(); ++i) {
      dlogits->v[i] = static_cast<T>(scale * (p[i] - (static_cast<int>(i) == k ? 1.0 : 0.0)));
    }
  }
  return loss;
}

}  // namespace traceforge::nn
