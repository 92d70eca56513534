#include "traceforge/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace traceforge::metrics {

double psnr(const RgbImage& a, const RgbImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels.size());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

std::vector<double> gaussian_window11() {
  std::vector<double> w(11);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// separable weighted local mean over the valid region
void local_stats(const std::vector<double>& img, int h, int w, const std::vector<double>& win,
                 std::vector<double>& out) {
  const int k = static_cast<int>(win.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += win[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  out.assign(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += win[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
}

}  // namespace

double ssim(const RgbImage& a, const RgbImage& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  const int h = a.height, w = a.width;
  if (h < 11 || w < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  const std::vector<double> win = gaussian_window11();
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;

  double total = 0.0;
  long count = 0;
  std::vector<double> xa(static_cast<std::size_t>(h) * w), xb(xa.size()), xab(xa.size()),
      xaa(xa.size()), xbb(xa.size());
  std::vector<double> ma, mb, mab, maa, mbb;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double va = a.at(y, x, c), vb = b.at(y, x, c);
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        xa[i] = va;
        xb[i] = vb;
        xab[i] = va * vb;
        xaa[i] = va * va;
        xbb[i] = vb * vb;
      }
    }
    local_stats(xa, h, w, win, ma);
    local_stats(xb, h, w, win, mb);
    local_stats(xab, h, w, win, mab);
    local_stats(xaa, h, w, win, maa);
    local_stats(xbb, h, w, win, mbb);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double mu_a = ma[i], mu_b = mb[i];
      const double var_a = maa[i] - mu_a * mu_a;
      const double var_b = mbb[i] - mu_b * mu_b;
      const double cov = mab[i] - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
      const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
      total += num / den;
      ++count;
    }
  }
  return total / count;
}

double map_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("map_score: size mismatch");
  long n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("map_score: both classes must be present");
  }
  // rank-sum formulation with midranks for ties
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double Confusion::f1() const {
  const double denom = 2.0 * tp + fp + fn;
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

double Confusion::mcc() const {
  const double d = std::sqrt(static_cast<double>(tp + fp)) * std::sqrt(static_cast<double>(tp + fn)) *
                   std::sqrt(static_cast<double>(tn + fp)) * std::sqrt(static_cast<double>(tn + fn));
  if (d == 0.0) return 0.0;
  return (static_cast<double>(tp) * tn - static_cast<double>(fp) * fn) / d;
}

Confusion confusion_at(const std::vector<double>& heat, const Mask& gt_mask, double threshold,
                       bool inverted) {
  Confusion c;
  for (std::size_t i = 0; i < heat.size(); ++i) {
    const double v = inverted ? 1.0 - heat[i] : heat[i];
    const bool pred = v >= threshold;
    const bool truth = gt_mask.values[i] != 0;
    if (pred && truth) ++c.tp;
    else if (pred && !truth) ++c.fp;
    else if (!pred && truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

LocalizationScore localization_scores(const forensics::Heatmap& heatmap, const Mask& gt_mask,
                                      int thresholds) {
  if (heatmap.height != gt_mask.height || heatmap.width != gt_mask.width) {
    throw std::invalid_argument("localization_scores: shape mismatch");
  }
  const std::size_t ones = gt_mask.count_ones();
  if (ones == 0 || ones == gt_mask.values.size()) {
    throw std::invalid_argument("localization_scores: ground truth mask must contain both classes");
  }
  if (thresholds < 2) throw std::invalid_argument("localization_scores: need at least 2 thresholds");

  LocalizationScore best;
  best.f1 = -1.0;
  best.mcc = -2.0;
  for (int polarity = 0; polarity < 2; ++polarity) {
    for (int t = 0; t < thresholds; ++t) {
      const double thr = static_cast<double>(t) / (thresholds - 1);
      const Confusion c = confusion_at(heatmap.values, gt_mask, thr, polarity == 1);
      const double f1 = c.f1();
      const double mcc = c.mcc();
      if (f1 > best.f1) {
        best.f1 = f1;
        best.f1_threshold = thr;
      }
      if (mcc > best.mcc) {
        best.mcc = mcc;
        best.mcc_threshold = thr;
      }
    }
  }
  return best;
}

double match_rate(const nets::Siamese<float>& net, const std::vector<PatchPair>& pairs,
                  const nets::Generator<float>* transform) {
  if (pairs.empty()) throw std::invalid_argument("match_rate: empty pair set");
  for (const PatchPair& p : pairs) {
    if (p.same_source) throw std::invalid_argument("match_rate: pairs must be different-source");
  }
  std::size_t matched = 0;
  for (const PatchPair& p : pairs) {
    nn::Tensor<float> a = nn::image_to_tensor<float>(p.a.pixels);
    nn::Tensor<float> b = nn::image_to_tensor<float>(p.b.pixels);
    if (transform) {
      a = transform->forward(a);
      b = transform->forward(b);
    }
    if (net.similarity(a, b) > 0.5) ++matched;
  }
  return static_cast<double>(matched) / pairs.size();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v.has_value()) j[key] = *v;
  };
  put("sar", sar);
  put("fmr", fmr);
  put("map", map);
  put("f1", f1);
  put("mcc", mcc);
  put("m_psnr", m_psnr);
  put("m_ssim", m_ssim);
  j["n_pairs"] = n_pairs;
  j["n_images"] = n_images;
  if (!config.empty()) j["config"] = config;
  return j.dump(2);
}

}  // namespace traceforge::metrics
