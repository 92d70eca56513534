#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "traceforge/attack.hpp"
#include "traceforge/forensics.hpp"
#include "traceforge/metrics.hpp"

namespace traceforge::evalrun {

enum class Detector { fsg, exif };

std::string to_string(Detector d);
Detector detector_from_string(const std::string& s);

struct DetectionEval {
  std::vector<double> spliced_scores;
  std::vector<double> authentic_scores;
  double map = 0.0;
};

/// Affinity + detection statistic per image, then rank AUC of spliced vs
/// authentic scores.
DetectionEval evaluate_detection(Detector d, const nets::Siamese<float>& net,
                                 const std::vector<RgbImage>& spliced,
                                 const std::vector<RgbImage>& authentic, int sampling_patches);

struct LocalizationEval {
  std::vector<double> f1;
  std::vector<double> mcc;
  double mean_f1 = 0.0;
  double mean_mcc = 0.0;
};

/// Per-image best-threshold localization scores against ground truth masks.
LocalizationEval evaluate_localization(Detector d, const nets::Siamese<float>& net,
                                       const std::vector<RgbImage>& images,
                                       const std::vector<Mask>& masks, int sampling_patches);

/// Different-source evaluation pairs drawn over a bounded pool of distinct
/// test patches (hardware pipelines always differ within a pair).
struct PairSet {
  std::vector<Patch> patches;
  std::vector<std::pair<int, int>> pairs;

  std::vector<PatchPair> to_patch_pairs() const;
};

PairSet build_pair_set(const synthcam::Dataset& data, synthcam::SplitGroup group, int n_pairs,
                       int pool_patches, std::uint64_t seed);

struct RateQuality {
  double rate = 0.0;    // fraction scored "same source"
  double m_psnr = 0.0;  // identity values (100 dB / 1.0) when no generator is given
  double m_ssim = 0.0;
};

/// Match rate over a pair set with each distinct patch embedded once;
/// numerically identical to metrics::match_rate on the materialized pairs.
RateQuality pool_match_rate(const nets::Siamese<float>& net, const PairSet& set,
                            const nets::Generator<float>* transform = nullptr);

/// Mean PSNR / SSIM between two image lists.
std::pair<double, double> mean_quality(const std::vector<RgbImage>& original,
                                       const std::vector<RgbImage>& processed);

}  // namespace traceforge::evalrun
