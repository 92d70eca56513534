#pragma once

#include <optional>
#include <string>
#include <vector>

#include "traceforge/forensics.hpp"
#include "traceforge/models.hpp"

namespace traceforge::baselines {

enum class Method { fgsm, pgd, cw };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// epsilon and step are given in 8-bit pixel units and divided by 255
/// internally.
struct EndToEndAttackConfig {
  Method method = Method::pgd;
  double epsilon = 3.0;
  double step = 1.0;
  int max_iter = 10;
  double cw_loss_ratio = 800.0;
  int cw_binary_search_steps = 5;
};

/// Paper defaults per method (pgd: eps 3 / step 1 / 10 iters; fgsm: step 0.1;
/// cw: step 1e-2 with a 5-step binary search over the loss ratio).
EndToEndAttackConfig default_endtoend_config(Method m);

/// Perturbs `patch` so the Siamese network scores it as matching `reference`.
Patch attack_pair(const nets::Siamese<float>& net, const Patch& patch, const Patch& reference,
                  const EndToEndAttackConfig& config);

/// Attacks every block of the attacker's grid toward one common reference
/// patch; overlapping block perturbations are averaged over coverage.
RgbImage attack_image_endtoend(const nets::Siamese<float>& net, const RgbImage& image,
                               const Patch& reference, const forensics::AnalysisBlockGrid& grid,
                               const EndToEndAttackConfig& config);

struct LotsConfig {
  forensics::AnalysisBlockGrid attack_grid;
  bool use_mask = true;
  int max_iter = 50;
  double feature_tolerance = 1e-3;  // stop when the embedding L2 distance drops below
  double step = 1.0;                // 8-bit units per iteration
};

/// Drives each block's embedding toward the mean embedding of authentic
/// blocks (those fully outside the mask when use_mask, else the upper-left
/// corner block).
RgbImage lots_attack(const nets::Siamese<float>& net, const RgbImage& image,
                     const LotsConfig& config, const Mask* gt_mask);

/// Gradient of -log S(x, reference) with respect to x (exposed for tests).
nn::Tensor<float> pair_loss_input_gradient(const nets::Siamese<float>& net,
                                           const nn::Tensor<float>& x,
                                           const nn::Tensor<float>& reference, double* loss = nullptr);

/// Mean squared embedding distance of grid blocks to the LOTS target
/// (exposed for the improvement invariant test).
double mean_feature_distance(const nets::Siamese<float>& net, const RgbImage& image,
                             const forensics::AnalysisBlockGrid& grid,
                             const std::vector<float>& target);
std::vector<float> lots_target(const nets::Siamese<float>& net, const RgbImage& image,
                               const LotsConfig& config, const Mask* gt_mask);

}  // namespace traceforge::baselines
