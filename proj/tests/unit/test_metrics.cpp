#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "traceforge/evalrun.hpp"
#include "traceforge/metrics.hpp"

using namespace traceforge;
using namespace traceforge::metrics;

namespace {

// straight-line SSIM oracle: direct weighted window sums, no separability
double ssim_oracle(const RgbImage& a, const RgbImage& b) {
  std::vector<double> w1(11);
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5;
    w1[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    sum += w1[i];
  }
  for (double& v : w1) v /= sum;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  long count = 0;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y + 11 <= a.height; ++y) {
      for (int x = 0; x + 11 <= a.width; ++x) {
        double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const double w = w1[i] * w1[j];
            const double va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
            mu_a += w * va;
            mu_b += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        }
        const double var_a = aa - mu_a * mu_a, var_b = bb - mu_b * mu_b, cov = ab - mu_a * mu_b;
        total += ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                 ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++count;
      }
    }
  }
  return total / count;
}

double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  long total = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++total;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / total;
}

}  // namespace

TEST_CASE("psnr boundary values") {
  Rng rng(1);
  const RgbImage a = tfu::random_image(16, 16, rng);
  CHECK(psnr(a, a) == 100.0);
  RgbImage zero(16, 16);
  RgbImage tenth(16, 16);
  for (auto& v : tenth.pixels) v = 0.1;
  CHECK(psnr(zero, tenth) == doctest::Approx(20.0).epsilon(1e-9));
  RgbImage other(8, 8);
  CHECK_THROWS_AS(psnr(a, other), std::invalid_argument);
}

TEST_CASE("ssim equals one on identical images and matches the oracle") {
  Rng rng(2);
  const RgbImage a = tfu::random_image(16, 16, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < 8; ++i) {
    const RgbImage x = tfu::random_image(14, 17, rng);
    RgbImage y = x;
    for (auto& v : y.pixels) v = std::clamp(v + rng.normal(0.0, 0.05), 0.0, 1.0);
    const double got = ssim(x, y);
    const double want = ssim_oracle(x, y);
    CHECK(tfu::rel_err(got, want) < 1e-9);
    CHECK(got < 1.0);
    CHECK(got > -1.0);
  }
  CHECK_THROWS(ssim(tfu::random_image(8, 8, rng), tfu::random_image(8, 8, rng)));
}

TEST_CASE("map_score boundaries and the four-score example") {
  CHECK(map_score({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(map_score({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  CHECK(map_score({0.9, 0.4, 0.6, 0.1}, {1, 1, 0, 0}) == doctest::Approx(0.75));
  CHECK(map_score({0.5, 0.5}, {1, 0}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(map_score({0.5, 0.6}, {1, 1}), std::invalid_argument);
}

TEST_CASE("map_score matches the pairwise oracle and is monotone invariant") {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = rng.uniform_int(4, 24);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.uniform_int(0, 9) / 9.0;  // force ties regularly
      labels[i] = rng.uniform() < 0.5 ? 1 : 0;
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    const double got = map_score(scores, labels);
    CHECK(tfu::rel_err(got, auc_oracle(scores, labels)) < 1e-9);
    // strictly monotone transform leaves the ranking unchanged
    std::vector<double> warped(n);
    for (int i = 0; i < n; ++i) warped[i] = std::exp(3.0 * scores[i]) + 1.0;
    CHECK(tfu::rel_err(map_score(warped, labels), got) < 1e-12);
  }
}

TEST_CASE("confusion example: one true positive, one false positive") {
  Mask m(2, 2);
  m.at(0, 0) = 1;
  const std::vector<double> heat{1.0, 1.0, 0.0, 0.0};
  const Confusion c = confusion_at(heat, m, 0.5, false);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.fn == 0);
  CHECK(c.tn == 2);
  CHECK(c.f1() == doctest::Approx(2.0 / 3.0));
  CHECK(c.mcc() == doctest::Approx(1.0 / std::sqrt(3.0)));
}

TEST_CASE("localization scores: perfect heatmaps under both polarities") {
  Mask m(8, 8);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) m.at(y, x) = 1;
  }
  forensics::Heatmap h;
  h.height = h.width = 8;
  h.values.assign(64, 0.0);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) h.values[y * 8 + x] = 1.0;
  }
  const LocalizationScore s = localization_scores(h, m);
  CHECK(s.f1 == doctest::Approx(1.0));
  CHECK(s.mcc == doctest::Approx(1.0));

  forensics::Heatmap inv = h;
  for (auto& v : inv.values) v = 1.0 - v;
  const LocalizationScore si = localization_scores(inv, m);
  CHECK(si.f1 == doctest::Approx(1.0));
  CHECK(si.mcc == doctest::Approx(1.0));

  Mask trivial(8, 8);
  CHECK_THROWS_AS(localization_scores(h, trivial), std::invalid_argument);
  for (auto& v : trivial.values) v = 1;
  CHECK_THROWS_AS(localization_scores(h, trivial), std::invalid_argument);
}

TEST_CASE("localization scores match a brute-force sweep") {
  Rng rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const int hgt = rng.uniform_int(3, 7), wid = rng.uniform_int(3, 7);
    forensics::Heatmap h;
    h.height = hgt;
    h.width = wid;
    h.values.resize(static_cast<std::size_t>(hgt) * wid);
    for (auto& v : h.values) v = rng.uniform_int(0, 10) / 10.0;
    Mask m(hgt, wid);
    bool one = false, zero = false;
    for (auto& v : m.values) {
      v = rng.uniform() < 0.4 ? 1 : 0;
      (v ? one : zero) = true;
    }
    if (!one || !zero) continue;

    const LocalizationScore got = localization_scores(h, m, 21);
    double best_f1 = -1.0, best_mcc = -2.0;
    for (int pol = 0; pol < 2; ++pol) {
      for (int t = 0; t <= 20; ++t) {
        const Confusion c = confusion_at(h.values, m, t / 20.0, pol == 1);
        best_f1 = std::max(best_f1, c.f1());
        best_mcc = std::max(best_mcc, c.mcc());
      }
    }
    CHECK(got.f1 == doctest::Approx(best_f1));
    CHECK(got.mcc == doctest::Approx(best_mcc));
    // refining thresholds never loses the best score
    const LocalizationScore fine = localization_scores(h, m, 101);
    CHECK(fine.f1 >= got.f1 - 1e-12);
    CHECK(fine.mcc >= got.mcc - 1e-12);
  }
}

TEST_CASE("match_rate follows the same-source decision rule") {
  Rng rng(5);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(6));
  std::vector<PatchPair> pairs;
  for (int i = 0; i < 4; ++i) {
    PatchPair p;
    p.a.pixels = tfu::random_image(kPatchSize, kPatchSize, rng);
    p.b.pixels = tfu::random_image(kPatchSize, kPatchSize, rng);
    p.same_source = false;
    pairs.push_back(std::move(p));
  }
  // push the head bias so every score saturates high, then low
  const std::size_t bias_idx = s.head.param_count() - 1;
  s.head.params()[bias_idx] = 40.0f;
  CHECK(match_rate(s, pairs) == 1.0);
  s.head.params()[bias_idx] = -40.0f;
  CHECK(match_rate(s, pairs) == 0.0);

  CHECK_THROWS_AS(match_rate(s, {}), std::invalid_argument);
  pairs[0].same_source = true;
  CHECK_THROWS_AS(match_rate(s, pairs), std::invalid_argument);
}

TEST_CASE("pool match rate agrees with the pair-list implementation") {
  const synthcam::Dataset data = tfu::tiny_dataset(10, 4, 8);
  const evalrun::PairSet set = evalrun::build_pair_set(data, synthcam::SplitGroup::seen, 30, 12, 9);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(7));
  const double pool = evalrun::pool_match_rate(s, set).rate;
  const double direct = match_rate(s, set.to_patch_pairs());
  CHECK(pool == doctest::Approx(direct));
  // pair order does not matter
  evalrun::PairSet shuffled = set;
  Rng rng(8);
  rng.shuffle(shuffled.pairs);
  CHECK(evalrun::pool_match_rate(s, shuffled).rate == doctest::Approx(pool));
}

TEST_CASE("metrics report serializes the populated fields") {
  MetricsReport r;
  r.sar = 0.9;
  r.m_psnr = 41.5;
  r.n_pairs = 10;
  const std::string j = r.to_json();
  CHECK(j.find("\"sar\"") != std::string::npos);
  CHECK(j.find("\"m_psnr\"") != std::string::npos);
  CHECK(j.find("\"fmr\"") == std::string::npos);
}
