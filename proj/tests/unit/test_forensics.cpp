#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "traceforge/forensics.hpp"

using namespace traceforge;
using namespace traceforge::forensics;

namespace {

AffinityMatrix make_affinity(const std::vector<double>& scores, int m) {
  AffinityMatrix a;
  a.m = m;
  a.scores = scores;
  // a fake non-overlapping grid so heatmap blocks are disjoint
  a.grid.block_size = 4;
  a.grid.sampling_patches = m;
  a.grid.rows = 1;
  a.grid.cols = m;
  for (int i = 0; i < m; ++i) a.grid.origins.emplace_back(0, 4 * i);
  return a;
}

// normalized laplacian eigenvalues via the plain Jacobi oracle
std::vector<double> laplacian_eigs_oracle(const AffinityMatrix& a) {
  const int m = a.m;
  std::vector<double> deg(m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) deg[i] += a.at(i, j);
  }
  std::vector<double> lap(static_cast<std::size_t>(m) * m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      lap[i * m + j] = (i == j ? 1.0 : 0.0) - a.at(i, j) / std::sqrt(deg[i] * deg[j]);
    }
  }
  return tfu::jacobi_eigenvalues(lap, m);
}

AffinityMatrix random_two_community(Rng& rng, int m, int split, double within_lo, double between_hi,
                                    std::vector<int>* planted) {
  AffinityMatrix a = make_affinity(std::vector<double>(m * m, 0.0), m);
  planted->assign(m, 0);
  for (int i = split; i < m; ++i) (*planted)[i] = 1;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i == j) {
        a.at(i, j) = 1.0;
      } else if (i < j) {
        const bool same = (*planted)[i] == (*planted)[j];
        const double v = same ? rng.uniform(within_lo, 1.0) : rng.uniform(0.0, between_hi);
        a.at(i, j) = v;
        a.at(j, i) = v;
      }
    }
  }
  return a;
}

}  // namespace

TEST_CASE("grid spacing: first at zero, last flush, even spacing") {
  const auto g = AnalysisBlockGrid::build(512, 512, 128, 4);
  CHECK(g.rows == 4);
  CHECK(g.cols == 4);
  REQUIRE(g.origins.size() == 16);
  std::vector<int> row_offsets;
  for (int i = 0; i < 4; ++i) row_offsets.push_back(g.origins[i * 4].first);
  CHECK(row_offsets == std::vector<int>{0, 128, 256, 384});
  std::vector<int> col_offsets;
  for (int i = 0; i < 4; ++i) col_offsets.push_back(g.origins[i].second);
  CHECK(col_offsets == std::vector<int>{0, 128, 256, 384});
}

TEST_CASE("grid gives the shorter dimension a proportional count") {
  const auto g = AnalysisBlockGrid::build(256, 512, 128, 4);
  CHECK(g.cols == 4);
  CHECK(g.rows == 2);
  CHECK(g.origins.front() == std::pair<int, int>{0, 0});
  CHECK(g.origins.back() == std::pair<int, int>{128, 384});
  // every block fully inside
  for (const auto& [r, c] : g.origins) {
    CHECK(r >= 0);
    CHECK(c >= 0);
    CHECK(r + 128 <= 256);
    CHECK(c + 128 <= 512);
  }
}

TEST_CASE("grid supports the sampling-patch experiment values") {
  for (int sp : {23, 30, 37, 45}) {
    const auto g = AnalysisBlockGrid::build(1536, 2048, 128, sp);
    CHECK(g.cols == sp);
    CHECK(g.rows == std::max(1, (int)std::lround(sp * 1536.0 / 2048.0)));
    CHECK(g.origins.front().second == 0);
    CHECK(g.origins.back().second == 2048 - 128);
    CHECK(g.origins.size() == static_cast<std::size_t>(g.rows) * g.cols);
  }
  CHECK_THROWS_AS(AnalysisBlockGrid::build(100, 200, 128, 4), std::invalid_argument);
}

TEST_CASE("affinity is symmetric with unit diagonal and counted pairs") {
  Rng rng(1);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(2));
  std::vector<Patch> patches(5);
  for (auto& p : patches) p.pixels = tfu::random_image(kPatchSize, kPatchSize, rng);
  const AffinityMatrix a = build_affinity(s, patches);
  CHECK(a.m == 5);
  CHECK(a.pairs_evaluated == 10);  // M(M-1)/2
  for (int i = 0; i < 5; ++i) {
    CHECK(a.at(i, i) == 1.0);
    for (int j = 0; j < 5; ++j) {
      CHECK(a.at(i, j) == a.at(j, i));
      CHECK(a.at(i, j) > 0.0);
      CHECK(a.at(i, j) <= 1.0);
    }
  }
  // matches the one-by-one similarity path
  CHECK(a.at(0, 1) ==
        doctest::Approx(nets::similarity(s, patches[0], patches[1])).epsilon(1e-12));
  CHECK_THROWS_AS(build_affinity(s, {patches[0]}), std::invalid_argument);
}

TEST_CASE("two disconnected cliques have a zero spectral gap") {
  std::vector<double> w(36, 0.0);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      if ((i < 3) == (j < 3)) w[i * 6 + j] = 1.0;
    }
  }
  const AffinityMatrix a = make_affinity(w, 6);
  const Spectrum s = normalized_laplacian_spectrum(a);
  CHECK(s.lambda1 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.lambda2 == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(detect_fsg(a) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("uniform-affinity spectrum matches the eigendecomposition oracle") {
  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const int m = rng.uniform_int(3, 8);
    const double w = rng.uniform(0.2, 0.95);
    std::vector<double> scores(m * m, w);
    for (int i = 0; i < m; ++i) scores[i * m + i] = 1.0;
    const AffinityMatrix a = make_affinity(scores, m);
    const auto oracle = laplacian_eigs_oracle(a);
    CHECK(tfu::rel_err(detect_fsg(a), std::clamp(1.0 - oracle[1], 0.0, 1.0)) < 1e-9);
    // fixed 4-node instance from the worked example
    if (m == 4) {
      const double expected_lambda2 = 4.0 * w / (1.0 + 3.0 * w);
      CHECK(tfu::rel_err(oracle[1], expected_lambda2) < 1e-9);
    }
  }
}

TEST_CASE("random affinity spectra match the eigendecomposition oracle") {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    const int m = rng.uniform_int(3, 8);
    std::vector<int> planted;
    const AffinityMatrix a = random_two_community(rng, m, m / 2, 0.3, 0.6, &planted);
    const Spectrum s = normalized_laplacian_spectrum(a);
    const auto oracle = laplacian_eigs_oracle(a);
    CHECK(tfu::rel_err(s.lambda1 + 1.0, oracle[0] + 1.0) < 1e-7);
    CHECK(tfu::rel_err(s.lambda2 + 1.0, oracle[1] + 1.0) < 1e-7);
  }
}

TEST_CASE("detection statistics are permutation invariant") {
  Rng rng(5);
  std::vector<int> planted;
  AffinityMatrix a = random_two_community(rng, 7, 3, 0.5, 0.4, &planted);
  const double fsg = detect_fsg(a);
  const double exif = detect_exif(a);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<int> perm(7);
    for (int i = 0; i < 7; ++i) perm[i] = i;
    rng.shuffle(perm);
    AffinityMatrix b = a;
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) b.at(i, j) = a.at(perm[i], perm[j]);
    }
    CHECK(tfu::rel_err(detect_fsg(b), fsg) < 1e-8);
    CHECK(tfu::rel_err(detect_exif(b), exif) < 1e-12);
  }
}

TEST_CASE("self-consistency statistic") {
  std::vector<double> all_one(9, 1.0);
  CHECK(detect_exif(make_affinity(all_one, 3)) == doctest::Approx(0.0));
  std::vector<double> none(9, 0.0);
  for (int i = 0; i < 3; ++i) none[i * 3 + i] = 1.0;
  CHECK(detect_exif(make_affinity(none, 3)) == doctest::Approx(1.0));
  // off-diagonals 0.8, 0.6, 0.4 -> mean 0.6 -> score 0.4
  std::vector<double> mixed{1.0, 0.8, 0.6, 0.8, 1.0, 0.4, 0.6, 0.4, 1.0};
  CHECK(detect_exif(make_affinity(mixed, 3)) == doctest::Approx(0.4));
}

TEST_CASE("degenerate all-zero affinity scores one with a warning") {
  AffinityMatrix a = make_affinity(std::vector<double>(16, 0.0), 4);
  CHECK(detect_fsg(a) == 1.0);
}

TEST_CASE("fsg localization labels the smaller clique as spliced") {
  // blocks 0..3 one community, 4..5 the other (smaller)
  std::vector<double> w(36, 0.02);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      if ((i < 4) == (j < 4)) w[i * 6 + j] = 0.9;
    }
  }
  for (int i = 0; i < 6; ++i) w[i * 6 + i] = 1.0;
  const AffinityMatrix a = make_affinity(w, 6);
  const Heatmap h = localize_fsg(a, 4, 24);
  for (int b = 0; b < 6; ++b) {
    const double v = h.at(1, b * 4 + 1);
    if (b < 4) CHECK(v == doctest::Approx(0.0));
    else CHECK(v == doctest::Approx(1.0));
  }
  for (double v : h.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("fsg localization recovers planted partitions exactly") {
  Rng rng(6);
  int recovered = 0;
  const int trials = 100;
  for (int rep = 0; rep < trials; ++rep) {
    const int m = rng.uniform_int(4, 8);
    const int split = rng.uniform_int(1, m - 1);
    std::vector<int> planted;
    // within-community weights strictly above between-community weights
    const AffinityMatrix a = random_two_community(rng, m, split, 0.65, 0.35, &planted);
    const Heatmap h = localize_fsg(a, 4, 4 * m);
    // read back block labels from disjoint block positions
    std::vector<int> got(m);
    for (int b = 0; b < m; ++b) got[b] = h.at(1, b * 4 + 1) > 0.5 ? 1 : 0;
    // compare up to label polarity: the heatmap marks the smaller side
    std::vector<int> want = planted;
    int n1 = 0;
    for (int v : want) n1 += v;
    if (2 * n1 == m) {
      // equal sizes: accept either labeling
      bool match = true, match_inv = true;
      for (int b = 0; b < m; ++b) {
        match &= got[b] == want[b];
        match_inv &= got[b] == 1 - want[b];
      }
      recovered += (match || match_inv) ? 1 : 0;
    } else {
      if (2 * n1 > m) {
        for (int& v : want) v = 1 - v;  // smaller side is community 0
      }
      recovered += got == want ? 1 : 0;
    }
  }
  CHECK(recovered == trials);
}

TEST_CASE("uniform affinity still yields a well-formed heatmap") {
  std::vector<double> w(25, 0.7);
  for (int i = 0; i < 5; ++i) w[i * 5 + i] = 1.0;
  const AffinityMatrix a = make_affinity(w, 5);
  const Heatmap h = localize_fsg(a, 4, 20);
  for (double v : h.values) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("mean shift separates two descriptor groups and flags the minority") {
  Rng rng(7);
  // descriptors: affinity rows of a strong two-community matrix, minority = 2
  std::vector<int> planted;
  const AffinityMatrix a = random_two_community(rng, 7, 5, 0.8, 0.2, &planted);
  int k = 0;
  const auto labels = mean_shift_cluster(a.scores, a.m, a.m, &k);
  CHECK(k >= 2);
  const Heatmap h = localize_exif(a, 4, 28);
  for (int b = 0; b < 7; ++b) {
    const double v = h.at(1, b * 4 + 1);
    if (b < 5) CHECK(v == doctest::Approx(0.0));
    else CHECK(v == doctest::Approx(1.0));
  }
}

TEST_CASE("mean shift on one tight cluster yields an empty heatmap") {
  std::vector<double> w(16, 0.9);
  for (int i = 0; i < 4; ++i) w[i * 4 + i] = 1.0;
  const AffinityMatrix a = make_affinity(w, 4);
  int k = 0;
  mean_shift_cluster(a.scores, a.m, a.m, &k);
  CHECK(k == 1);
  const Heatmap h = localize_exif(a, 4, 16);
  for (double v : h.values) CHECK(v == 0.0);
}

TEST_CASE("sample_grid copies blocks at the grid origins") {
  Rng rng(8);
  const RgbImage img = tfu::random_image(150, 200, rng);
  const auto grid = AnalysisBlockGrid::build(150, 200, 128, 2);
  const auto blocks = sample_grid(img, grid);
  REQUIRE(blocks.size() == grid.origins.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    CHECK(blocks[b].origin_row == grid.origins[b].first);
    CHECK(blocks[b].origin_col == grid.origins[b].second);
    CHECK(blocks[b].pixels.at(3, 5, 2) ==
          img.at(grid.origins[b].first + 3, grid.origins[b].second + 5, 2));
  }
}
