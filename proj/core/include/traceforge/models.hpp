#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "traceforge/nn.hpp"
#include "traceforge/synthcam.hpp"

namespace traceforge::nets {

// ---------------------------------------------------------------------------
// Generator: fully convolutional trace synthesizer.
// input conv (3x3, 64) -> five residual blocks (two 3x3/64 convs + skip)
// -> reduction conv (3x3, 3) -> clamp to [0,1]. Twelve convolutions total,
// stride 1 everywhere, spatial size preserved by unit zero padding.
// ---------------------------------------------------------------------------

enum class GeneratorInit {
  near_identity,  // starts as the identity map; training only has to learn the delta
  random,
};

struct GeneratorArch {
  int channels = 64;
  int blocks = 5;
};

template <typename T>
struct Generator {
  nn::Net<T> net;
  GeneratorArch arch;

  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Trace<T>* tr = nullptr) const {
    if (x.h < 3 || x.w < 3) throw std::invalid_argument("generator: input must be at least 3x3");
    return net.forward(x, tr);
  }

  RgbImage apply(const RgbImage& image) const {
    return nn::tensor_to_image(forward(nn::image_to_tensor<T>(image)));
  }
};

template <typename T>
Generator<T> build_generator(Rng rng, GeneratorInit init = GeneratorInit::near_identity,
                             GeneratorArch arch = {});

/// Parameter count implied by the architecture table; frozen in tests.
std::size_t generator_param_count(const GeneratorArch& arch = {});

// ---------------------------------------------------------------------------
// Classifier: camera-model CNN with a fixed high-pass residual front end,
// four convolutions and two dense layers, softmax output over seen models.
// ---------------------------------------------------------------------------

struct ClassifierArch {
  int input = kPatchSize;
  std::vector<int> channels{8, 16, 24, 32};
  std::vector<int> pools{4, 4, 2, 4};
  int hidden = 48;
};

template <typename T>
struct Classifier {
  nn::Net<T> net;
  ClassifierArch arch;
  std::vector<int> class_labels;  // class index -> camera id

  int n_classes() const { return static_cast<int>(class_labels.size()); }
  int class_of_label(int label) const {
    for (std::size_t i = 0; i < class_labels.size(); ++i) {
      if (class_labels[i] == label) return static_cast<int>(i);
    }
    return -1;
  }
};

template <typename T>
Classifier<T> build_classifier(Rng rng, std::vector<int> class_labels, ClassifierArch arch = {});

/// Softmax probabilities for a patch; throws on a wrong patch size.
template <typename T>
std::vector<double> classify(const Classifier<T>& c, const nn::Tensor<T>& patch);
std::vector<double> classify(const Classifier<float>& c, const Patch& patch);

// ---------------------------------------------------------------------------
// Siamese network: shared feature extractor plus an order-invariant
// comparison head (elementwise product and absolute difference), sigmoid
// output. S(a,b) == S(b,a) holds exactly by construction.
// ---------------------------------------------------------------------------

enum class SiameseObjective {
  camera_only,             // same source <=> same hardware pipeline
  camera_plus_processing,  // same source <=> same hardware and same jpeg quality
  holdout,                 // camera_only semantics, reserved transfer target
};

std::string to_string(SiameseObjective o);
SiameseObjective siamese_objective_from_string(const std::string& s);

struct SiameseArch {
  int input = kPatchSize;
  std::vector<int> channels{8, 16, 24};
  std::vector<int> pools{4, 4, 2};
  int embed_dim = 64;
  int head_hidden = 32;
};

template <typename T>
struct Siamese {
  nn::Net<T> extractor;  // patch -> (1,1,embed_dim)
  nn::Net<T> head;       // (1,1,2*embed_dim) -> logit
  SiameseArch arch;
  SiameseObjective objective = SiameseObjective::camera_only;
  std::vector<int> train_profile_ids;

  nn::Tensor<T> embed(const nn::Tensor<T>& patch, nn::Trace<T>* tr = nullptr) const {
    if (patch.h != arch.input || patch.w != arch.input || patch.c != 3) {
      throw std::invalid_argument("siamese: wrong patch size");
    }
    return extractor.forward(patch, tr);
  }

  double logit_from_embeddings(const nn::Tensor<T>& f1, const nn::Tensor<T>& f2) const;
  double similarity_from_embeddings(const nn::Tensor<T>& f1, const nn::Tensor<T>& f2) const {
    return nn::sigmoid(logit_from_embeddings(f1, f2));
  }
  double similarity(const nn::Tensor<T>& a, const nn::Tensor<T>& b) const {
    return similarity_from_embeddings(embed(a), embed(b));
  }
};

template <typename T>
Siamese<T> build_siamese(Rng rng, SiameseArch arch = {});

/// Score in (0,1); throws on a wrong patch size.
double similarity(const Siamese<float>& s, const Patch& a, const Patch& b);

/// Order-invariant combination [f1*f2, |f1-f2|] and its adjoint.
template <typename T>
nn::Tensor<T> siamese_combine(const nn::Tensor<T>& f1, const nn::Tensor<T>& f2);
template <typename T>
void siamese_combine_backward(const nn::Tensor<T>& dcomb, const nn::Tensor<T>& f1,
                              const nn::Tensor<T>& f2, nn::Tensor<T>& df1, nn::Tensor<T>& df2);

// ---------------------------------------------------------------------------
// Supervised training
// ---------------------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_metric = 0.0;  // accuracy
};

struct ClassifierTrainConfig {
  double lr = 1e-3;
  int lr_halve_every = 3;
  int epochs = 10;
  int batch = 32;
  int max_steps_per_epoch = 0;  // 0 = full pass
  std::uint64_t seed = 11;
  bool verbose = false;
};

struct ClassifierTrainReport {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool single_class = false;
};

Classifier<float> train_classifier(const synthcam::Dataset& data,
                                   const ClassifierTrainConfig& config,
                                   ClassifierTrainReport* report = nullptr);

double classifier_accuracy(const Classifier<float>& c,
                           const std::vector<synthcam::PatchRecord>& patches);

struct SiameseTrainConfig {
  double lr = 1e-3;
  int lr_halve_every = 3;
  int epochs = 8;
  int pairs_per_epoch = 3000;
  int batch_pairs = 32;
  int val_pairs = 600;
  std::vector<int> train_profile_ids;  // empty = every seen profile
  SiameseArch arch;
  std::uint64_t seed = 12;
  bool verbose = false;
};

struct SiameseTrainReport {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
};

Siamese<float> train_siamese(const synthcam::Dataset& data, SiameseObjective objective,
                             const SiameseTrainConfig& config, SiameseTrainReport* report = nullptr);

/// Balanced same/different pair accuracy of a trained net on a record set.
double siamese_pair_accuracy(const Siamese<float>& s, const synthcam::Dataset& data,
                             const std::vector<synthcam::PatchRecord>& records, int n_pairs,
                             std::uint64_t seed);

/// Whether two records count as "same source" under an objective.
bool same_source_label(const synthcam::Dataset& data, SiameseObjective objective,
                       const synthcam::PatchRecord& a, const synthcam::PatchRecord& b);

template <typename T>
double Siamese<T>::logit_from_embeddings(const nn::Tensor<T>& f1, const nn::Tensor<T>& f2) const {
  return static_cast<double>(head.forward(siamese_combine(f1, f2)).v[0]);
}

// Explicit instantiation declarations (definitions live in models.cpp).
extern template Generator<float> build_generator<float>(Rng, GeneratorInit, GeneratorArch);
extern template Generator<double> build_generator<double>(Rng, GeneratorInit, GeneratorArch);
extern template Classifier<float> build_classifier<float>(Rng, std::vector<int>, ClassifierArch);
extern template Classifier<double> build_classifier<double>(Rng, std::vector<int>, ClassifierArch);
extern template Siamese<float> build_siamese<float>(Rng, SiameseArch);
extern template Siamese<double> build_siamese<double>(Rng, SiameseArch);
extern template std::vector<double> classify<float>(const Classifier<float>&, const nn::Tensor<float>&);
extern template std::vector<double> classify<double>(const Classifier<double>&, const nn::Tensor<double>&);
extern template nn::Tensor<float> siamese_combine<float>(const nn::Tensor<float>&, const nn::Tensor<float>&);
extern template nn::Tensor<double> siamese_combine<double>(const nn::Tensor<double>&, const nn::Tensor<double>&);
extern template void siamese_combine_backward<float>(const nn::Tensor<float>&, const nn::Tensor<float>&,
                                                     const nn::Tensor<float>&, nn::Tensor<float>&,
                                                     nn::Tensor<float>&);
extern template void siamese_combine_backward<double>(const nn::Tensor<double>&, const nn::Tensor<double>&,
                                                      const nn::Tensor<double>&, nn::Tensor<double>&,
                                                      nn::Tensor<double>&);

}  // namespace traceforge::nets
