#include "traceforge/evalrun.hpp"

#include <algorithm>

namespace traceforge::evalrun {

std::string to_string(Detector d) { return d == Detector::fsg ? "fsg" : "exif"; }

Detector detector_from_string(const std::string& s) {
  if (s == "fsg") return Detector::fsg;
  if (s == "exif") return Detector::exif;
  throw std::invalid_argument("unknown detector: " + s);
}

DetectionEval evaluate_detection(Detector d, const nets::Siamese<float>& net,
                                 const std::vector<RgbImage>& spliced,
                                 const std::vector<RgbImage>& authentic, int sampling_patches) {
  DetectionEval out;
  auto score = [&](const RgbImage& img) {
    const auto grid = forensics::AnalysisBlockGrid::build(img.height, img.width, kPatchSize,
                                                          sampling_patches);
    const forensics::AffinityMatrix a = forensics::analyze_image(net, img, grid);
    return d == Detector::fsg ? forensics::detect_fsg(a) : forensics::detect_exif(a);
  };
  for (const RgbImage& img : spliced) out.spliced_scores.push_back(score(img));
  for (const RgbImage& img : authentic) out.authentic_scores.push_back(score(img));
  std::vector<double> scores = out.spliced_scores;
  scores.insert(scores.end(), out.authentic_scores.begin(), out.authentic_scores.end());
  std::vector<int> labels(out.spliced_scores.size(), 1);
  labels.insert(labels.end(), out.authentic_scores.size(), 0);
  out.map = metrics::map_score(scores, labels);
  return out;
}

LocalizationEval evaluate_localization(Detector d, const nets::Siamese<float>& net,
                                       const std::vector<RgbImage>& images,
                                       const std::vector<Mask>& masks, int sampling_patches) {
  if (images.size() != masks.size()) {
    throw std::invalid_argument("evaluate_localization: image/mask count mismatch");
  }
  LocalizationEval out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const RgbImage& img = images[i];
    const auto grid = forensics::AnalysisBlockGrid::build(img.height, img.width, kPatchSize,
                                                          sampling_patches);
    const forensics::AffinityMatrix a = forensics::analyze_image(net, img, grid);
    const forensics::Heatmap h = d == Detector::fsg
                                     ? forensics::localize_fsg(a, img.height, img.width)
                                     : forensics::localize_exif(a, img.height, img.width);
    const metrics::LocalizationScore s = metrics::localization_scores(h, masks[i]);
    out.f1.push_back(s.f1);
    out.mcc.push_back(s.mcc);
  }
  for (double v : out.f1) out.mean_f1 += v;
  for (double v : out.mcc) out.mean_mcc += v;
  if (!out.f1.empty()) {
    out.mean_f1 /= static_cast<double>(out.f1.size());
    out.mean_mcc /= static_cast<double>(out.mcc.size());
  }
  return out;
}

std::vector<PatchPair> PairSet::to_patch_pairs() const {
  std::vector<PatchPair> out;
  out.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    PatchPair p;
    p.a = patches[a];
    p.b = patches[b];
    p.same_source = false;
    out.push_back(std::move(p));
  }
  return out;
}

PairSet build_pair_set(const synthcam::Dataset& data, synthcam::SplitGroup group, int n_pairs,
                       int pool_patches, std::uint64_t seed) {
  const synthcam::DatasetSplit* split = data.find(group, synthcam::SplitRole::test);
  if (!split || split->patches.empty()) throw std::invalid_argument("test split missing or empty");
  Rng rng(seed);
  std::vector<int> idx(split->patches.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  rng.shuffle(idx);
  const int pool_n = std::min<int>(pool_patches, static_cast<int>(idx.size()));

  PairSet set;
  set.patches.reserve(pool_n);
  std::vector<int> hw(pool_n);
  for (int i = 0; i < pool_n; ++i) {
    set.patches.push_back(split->patches[idx[i]].to_patch());
    hw[i] = data.hardware_group(split->patches[idx[i]].camera_id);
  }
  int guard = 0;
  while (static_cast<int>(set.pairs.size()) < n_pairs && guard < n_pairs * 100) {
    ++guard;
    const int a = static_cast<int>(rng.index(pool_n));
    const int b = static_cast<int>(rng.index(pool_n));
    if (hw[a] == hw[b]) continue;
    set.pairs.emplace_back(a, b);
  }
  if (set.pairs.empty()) throw std::runtime_error("build_pair_set: no different-source pairs");
  return set;
}

RateQuality pool_match_rate(const nets::Siamese<float>& net, const PairSet& set,
                            const nets::Generator<float>* transform) {
  RateQuality out;
  std::vector<nn::Tensor<float>> embeds(set.patches.size());
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (std::size_t i = 0; i < set.patches.size(); ++i) {
    nn::Tensor<float> x = nn::image_to_tensor<float>(set.patches[i].pixels);
    if (transform) {
      const nn::Tensor<float> y = transform->forward(x);
      const RgbImage yi = nn::tensor_to_image(y);
      psnr_sum += metrics::psnr(set.patches[i].pixels, yi);
      ssim_sum += metrics::ssim(set.patches[i].pixels, yi);
      x = y;
    }
    embeds[i] = net.embed(x);
  }
  std::size_t matched = 0;
  for (const auto& [a, b] : set.pairs) {
    if (net.similarity_from_embeddings(embeds[a], embeds[b]) > 0.5) ++matched;
  }
  out.rate = static_cast<double>(matched) / set.pairs.size();
  if (transform) {
    out.m_psnr = psnr_sum / set.patches.size();
    out.m_ssim = ssim_sum / set.patches.size();
  } else {
    out.m_psnr = 100.0;
    out.m_ssim = 1.0;
  }
  return out;
}

std::pair<double, double> mean_quality(const std::vector<RgbImage>& original,
                                       const std::vector<RgbImage>& processed) {
  if (original.size() != processed.size() || original.empty()) {
    throw std::invalid_argument("mean_quality: size mismatch");
  }
  double p = 0.0, s = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    p += metrics::psnr(original[i], processed[i]);
    s += metrics::ssim(original[i], processed[i]);
  }
  return {p / original.size(), s / original.size()};
}

}  // namespace traceforge::evalrun
