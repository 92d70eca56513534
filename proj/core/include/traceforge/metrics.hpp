#pragma once

#include <optional>
#include <string>
#include <vector>

#include "traceforge/forensics.hpp"
#include "traceforge/models.hpp"

namespace traceforge::metrics {

/// Peak signal-to-noise ratio in dB for unit-peak images; 100 dB cap below
/// MSE 1e-10.
double psnr(const RgbImage& a, const RgbImage& b);

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5), standard
/// stability constants for unit peak, averaged over channels and positions.
double ssim(const RgbImage& a, const RgbImage& b);

/// Rank AUC with spliced as the positive class; ties count 0.5.
double map_score(const std::vector<double>& scores, const std::vector<int>& labels);

struct LocalizationScore {
  double f1 = 0.0;
  double mcc = 0.0;
  double f1_threshold = 0.0;
  double mcc_threshold = 0.0;
};

/// Best F1 and MCC over an even threshold sweep, taking the better of the
/// heatmap and its inversion (community labels have arbitrary polarity).
LocalizationScore localization_scores(const forensics::Heatmap& heatmap, const Mask& gt_mask,
                                      int thresholds = 101);

/// Fraction of pairs scored "same source" (> 0.5). With a generator this is
/// the successful attack rate; without, the false match rate.
double match_rate(const nets::Siamese<float>& net, const std::vector<PatchPair>& pairs,
                  const nets::Generator<float>* transform = nullptr);

/// Confusion-matrix scores for a fixed binarization (exposed for tests).
struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double f1() const;
  double mcc() const;
};
Confusion confusion_at(const std::vector<double>& heat, const Mask& gt_mask, double threshold,
                       bool inverted);

struct MetricsReport {
  std::optional<double> sar, fmr, map, f1, mcc, m_psnr, m_ssim;
  long n_pairs = 0;
  long n_images = 0;
  std::string config;

  std::string to_json() const;
};

}  // namespace traceforge::metrics
