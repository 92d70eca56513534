#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "traceforge/models.hpp"

namespace traceforge::attack {

struct Phase1Config {
  double alpha = 20.0;
  int target_camera = 0;  // profile id; must be a seen label
  bool randomize_target = false;
  double lr = 1e-4;
  int lr_halve_every = 3;
  int epochs = 10;
  int batch = 32;
  int steps_per_epoch = 0;  // 0 = full pass over the train split
  int val_patches = 200;
  double min_psnr = 40.0;  // quality gate for model selection
  double log_epsilon = 1e-7;
  std::uint64_t seed = 21;
  bool verbose = false;
};

struct Phase2Config {
  std::vector<double> betas;  // weight per targeted siamese network
  double lr = 1e-4;
  int lr_halve_every = 3;
  int max_epochs = 20;
  int pool_size = 48;
  int pairs_per_batch = 32;
  int steps_per_epoch = 0;  // 0 = ceil(train size / pool_size)
  int val_pairs = 2000;
  int val_pool_patches = 200;
  double log_epsilon = 1e-7;
  std::uint64_t seed = 22;
  bool verbose = false;
};

struct Phase1Loss {
  double total = 0.0;
  double classification = 0.0;  // -log C(G(I))_target
  double perceptual = 0.0;      // mean absolute pixel difference
};

struct Phase2Loss {
  double total = 0.0;
  double similarity = 0.0;  // sum of beta-weighted per-network terms
  double perceptual = 0.0;  // mean squared pixel difference, averaged over the pair
  std::vector<double> per_network;
};

/// Scalar forms of the loss formulas (testable against pencil-and-paper values).
double phase1_total(double p_target, double l1, double alpha, double log_epsilon);
double phase2_similarity_term(const std::vector<double>& betas, const std::vector<double>& scores,
                              double log_epsilon);

/// Total phase-1 loss for one patch. The classifier stays frozen; generator
/// parameter gradients are accumulated into *dgen (scaled by `weight`).
template <typename T>
Phase1Loss phase1_loss(const nets::Generator<T>& gen, const nets::Classifier<T>& cls,
                       const nn::Tensor<T>& input, int target_class, double alpha,
                       double log_epsilon, std::vector<T>* dgen = nullptr, double weight = 1.0);

/// Total phase-2 loss for one patch pair against an ensemble of frozen
/// Siamese networks. Gradients flow through both generator branches.
template <typename T>
Phase2Loss phase2_loss(const std::vector<std::pair<const nets::Siamese<T>*, double>>& siamese,
                       const nn::Tensor<T>& in1, const nn::Tensor<T>& in2,
                       const nets::Generator<T>& gen, double log_epsilon,
                       std::vector<T>* dgen = nullptr, double weight = 1.0);

struct AttackEpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double loss_classification = 0.0;          // phase 1
  double loss_perceptual = 0.0;
  std::vector<double> loss_per_network;      // phase 2
  double val_metric = 0.0;                   // target fraction (p1) or SAR (p2)
  double val_psnr = 0.0;
};

struct AttackTrainReport {
  std::vector<AttackEpochLog> epochs;
  int best_epoch = -1;
  double best_metric = 0.0;
  bool stopped_early = false;
};

/// Phase 1: pre-train the generator to synthesize the target camera's traces
/// against a frozen classifier. Keeps the epoch with the best validation
/// target fraction among epochs meeting the quality gate.
AttackTrainReport train_phase1(nets::Generator<float>& gen, const nets::Classifier<float>& cls,
                               const synthcam::Dataset& data, const Phase1Config& config);

/// Phase 2: refine the generator against frozen Siamese networks. Each step
/// samples a patch pool, draws pairs with replacement and minimizes the
/// similarity + perceptual objective; stops when validation SAR decreases.
AttackTrainReport train_phase2(nets::Generator<float>& gen,
                               const std::vector<std::pair<const nets::Siamese<float>*, double>>& siamese,
                               const synthcam::Dataset& data, const Phase2Config& config);

/// Pass a full image through the generator, optionally tile by tile.
/// Tiles are non-overlapping and reassembled at identical coordinates.
RgbImage deploy(const nets::Generator<float>& gen, const RgbImage& image,
                std::optional<int> tile_size = std::nullopt);

/// Attack only the masked region: generator output inside the mask, original
/// pixels outside.
RgbImage generate_region(const nets::Generator<float>& gen, const RgbImage& image, const Mask& mask);

// --- template definitions -------------------------------------------------

template <typename T>
Phase1Loss phase1_loss(const nets::Generator<T>& gen, const nets::Classifier<T>& cls,
                       const nn::Tensor<T>& input, int target_class, double alpha,
                       double log_epsilon, std::vector<T>* dgen, double weight) {
  if (target_class < 0 || target_class >= cls.n_classes()) {
    throw std::invalid_argument("phase1_loss: target class out of range");
  }
  nn::Trace<T> tr_gen, tr_cls;
  const nn::Tensor<T> out = gen.forward(input, dgen ? &tr_gen : nullptr);
  const nn::Tensor<T> logits = cls.net.forward(out, dgen ? &tr_cls : nullptr);

  Phase1Loss loss;
  const std::size_t n = input.v.size();
  double l1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    l1 += std::abs(static_cast<double>(input.v[i]) - static_cast<double>(out.v[i]));
  }
  loss.perceptual = l1 / static_cast<double>(n);

  nn::Tensor<T> dlogits;
  loss.classification =
      nn::softmax_ce(logits, target_class, log_epsilon, dgen ? &dlogits : nullptr, alpha * weight);
  loss.total = alpha * loss.classification + loss.perceptual;

  if (dgen) {
    nn::Tensor<T> dout = cls.net.backward(dlogits, tr_cls, nullptr);
    const T scale = static_cast<T>(weight / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const T d = out.v[i] - input.v[i];
      dout.v[i] += d > T(0) ? scale : (d < T(0) ? -scale : T(0));
    }
    gen.net.backward(dout, tr_gen, dgen);
  }
  return loss;
}

template <typename T>
Phase2Loss phase2_loss(const std::vector<std::pair<const nets::Siamese<T>*, double>>& siamese,
                       const nn::Tensor<T>& in1, const nn::Tensor<T>& in2,
                       const nets::Generator<T>& gen, double log_epsilon, std::vector<T>* dgen,
                       double weight) {
  if (siamese.empty()) throw std::invalid_argument("phase2_loss: empty siamese ensemble");

  nn::Trace<T> tr1, tr2;
  const nn::Tensor<T> out1 = gen.forward(in1, dgen ? &tr1 : nullptr);
  const nn::Tensor<T> out2 = gen.forward(in2, dgen ? &tr2 : nullptr);

  Phase2Loss loss;
  const std::size_t n = in1.v.size();
  double mse1 = 0.0, mse2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d1 = static_cast<double>(in1.v[i]) - static_cast<double>(out1.v[i]);
    const double d2 = static_cast<double>(in2.v[i]) - static_cast<double>(out2.v[i]);
    mse1 += d1 * d1;
    mse2 += d2 * d2;
  }
  loss.perceptual = 0.5 * (mse1 + mse2) / static_cast<double>(n);

  nn::Tensor<T> dout1(out1.h, out1.w, out1.c), dout2(out2.h, out2.w, out2.c);
  const double cap = -std::log(log_epsilon);

  for (const auto& [net, beta] : siamese) {
    nn::Trace<T> trf1, trf2, trh;
    const nn::Tensor<T> f1 = net->extractor.forward(out1, dgen ? &trf1 : nullptr);
    const nn::Tensor<T> f2 = net->extractor.forward(out2, dgen ? &trf2 : nullptr);
    const nn::Tensor<T> comb = nets::siamese_combine(f1, f2);
    const nn::Tensor<T> head_out = net->head.forward(comb, dgen ? &trh : nullptr);
    const double logit = static_cast<double>(head_out.v[0]);
    // -log sigmoid(logit), reported value clamped away from infinity; the
    // gradient stays the exact derivative so a saturated score still trains.
    double term = nn::softplus_neg(logit);
    if (term > cap) term = cap;
    loss.per_network.push_back(term);
    loss.similarity += beta * term;

    if (dgen) {
      nn::Tensor<T> dlogit(1, 1, 1);
      dlogit.v[0] = static_cast<T>(beta * weight * (nn::sigmoid(logit) - 1.0));
      const nn::Tensor<T> dcomb = net->head.backward(dlogit, trh, nullptr);
      nn::Tensor<T> df1, df2;
      nets::siamese_combine_backward(dcomb, f1, f2, df1, df2);
      const nn::Tensor<T> dy1 = net->extractor.backward(df1, trf1, nullptr);
      const nn::Tensor<T> dy2 = net->extractor.backward(df2, trf2, nullptr);
      for (std::size_t i = 0; i < dout1.v.size(); ++i) {
        dout1.v[i] += dy1.v[i];
        dout2.v[i] += dy2.v[i];
      }
    }
  }
  loss.total = loss.similarity + loss.perceptual;

  if (dgen) {
    const T scale = static_cast<T>(weight / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      dout1.v[i] += (out1.v[i] - in1.v[i]) * scale;
      dout2.v[i] += (out2.v[i] - in2.v[i]) * scale;
    }
    gen.net.backward(dout1, tr1, dgen);
    gen.net.backward(dout2, tr2, dgen);
  }
  return loss;
}

}  // namespace traceforge::attack
