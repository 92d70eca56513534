#include "traceforge/forensics.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <iostream>

namespace traceforge::forensics {

using nn::Tensor;

AnalysisBlockGrid AnalysisBlockGrid::build(int height, int width, int block_size,
                                           int sampling_patches) {
  if (height < block_size || width < block_size) {
    throw std::invalid_argument("analysis grid: image smaller than block size");
  }
  if (sampling_patches < 1) throw std::invalid_argument("analysis grid: sampling_patches < 1");

  AnalysisBlockGrid grid;
  grid.block_size = block_size;
  grid.sampling_patches = sampling_patches;

  const int long_dim = std::max(height, width);
  const int short_dim = std::min(height, width);
  const int n_long = sampling_patches;
  const int n_short = std::max(
      1, static_cast<int>(std::lround(static_cast<double>(sampling_patches) * short_dim / long_dim)));
  grid.rows = height >= width ? n_long : n_short;
  grid.cols = height >= width ? n_short : n_long;

  auto offsets = [block_size](int length, int count) {
    std::vector<int> out(count);
    if (count == 1) {
      out[0] = 0;
      return out;
    }
    const double span = length - block_size;
    for (int i = 0; i < count; ++i) {
      out[i] = static_cast<int>(std::lround(span * i / (count - 1)));
    }
    return out;
  };
  const std::vector<int> row_off = offsets(height, grid.rows);
  const std::vector<int> col_off = offsets(width, grid.cols);
  for (int r : row_off) {
    for (int c : col_off) grid.origins.emplace_back(r, c);
  }
  return grid;
}

std::vector<Patch> sample_grid(const RgbImage& image, const AnalysisBlockGrid& grid) {
  if (image.height < grid.block_size || image.width < grid.block_size) {
    throw std::invalid_argument("sample_grid: image smaller than block size");
  }
  std::vector<Patch> out;
  out.reserve(grid.origins.size());
  for (const auto& [r, c] : grid.origins) {
    Patch p;
    p.origin_row = r;
    p.origin_col = c;
    p.pixels = RgbImage(grid.block_size, grid.block_size);
    for (int y = 0; y < grid.block_size; ++y) {
      for (int x = 0; x < grid.block_size; ++x) {
        for (int ch = 0; ch < 3; ++ch) p.pixels.at(y, x, ch) = image.at(r + y, c + x, ch);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

AffinityMatrix affinity_from_embeddings(const nets::Siamese<float>& net,
                                        const std::vector<Tensor<float>>& embeds) {
  AffinityMatrix a;
  a.m = static_cast<int>(embeds.size());
  a.scores.assign(static_cast<std::size_t>(a.m) * a.m, 0.0);
  for (int i = 0; i < a.m; ++i) a.at(i, i) = 1.0;
  for (int i = 0; i < a.m; ++i) {
    for (int j = i + 1; j < a.m; ++j) {
      const double s = net.similarity_from_embeddings(embeds[i], embeds[j]);
      a.at(i, j) = s;
      a.at(j, i) = s;
      ++a.pairs_evaluated;
    }
  }
  return a;
}

}  // namespace

AffinityMatrix build_affinity(const nets::Siamese<float>& net, const std::vector<Patch>& patches) {
  if (patches.size() < 2) throw std::invalid_argument("build_affinity: need at least two patches");
  std::vector<Tensor<float>> embeds;
  embeds.reserve(patches.size());
  for (const Patch& p : patches) embeds.push_back(net.embed(nn::image_to_tensor<float>(p.pixels)));
  return affinity_from_embeddings(net, embeds);
}

AffinityMatrix analyze_image(const nets::Siamese<float>& net, const RgbImage& image,
                             const AnalysisBlockGrid& grid) {
  std::vector<Tensor<float>> embeds;
  embeds.reserve(grid.origins.size());
  Tensor<float> block(grid.block_size, grid.block_size, 3);
  for (const auto& [r, c] : grid.origins) {
    for (int y = 0; y < grid.block_size; ++y) {
      for (int x = 0; x < grid.block_size; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          block.at(y, x, ch) = static_cast<float>(image.at(r + y, c + x, ch));
        }
      }
    }
    embeds.push_back(net.embed(block));
  }
  AffinityMatrix a = affinity_from_embeddings(net, embeds);
  a.grid = grid;
  return a;
}

Spectrum normalized_laplacian_spectrum(const AffinityMatrix& affinity) {
  const int m = affinity.m;
  if (m < 2) throw std::invalid_argument("spectrum: need at least a 2x2 affinity");
  std::vector<double> lap(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> deg(m, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) deg[i] += affinity.at(i, j);
  }
  for (int i = 0; i < m; ++i) {
    if (deg[i] <= 0.0) throw std::runtime_error("spectrum: zero-degree node");
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      lap[static_cast<std::size_t>(i) * m + j] =
          (i == j ? 1.0 : 0.0) - affinity.at(i, j) / std::sqrt(deg[i] * deg[j]);
    }
  }
  std::vector<double> w(m, 0.0);
  std::vector<double> z(static_cast<std::size_t>(m) * 2, 0.0);
  std::vector<lapack_int> isuppz(4);
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_ROW_MAJOR, 'V', 'I', 'U', m, lap.data(), m, 0.0,
                                         0.0, 1, 2, 1e-12, &found, w.data(), z.data(), 2,
                                         isuppz.data());
  if (info != 0 || found < 2) throw std::runtime_error("spectrum: eigensolver failed");
  Spectrum s;
  s.lambda1 = w[0];
  s.lambda2 = w[1];
  s.fiedler.resize(m);
  for (int i = 0; i < m; ++i) s.fiedler[i] = z[static_cast<std::size_t>(i) * 2 + 1];
  return s;
}

double detect_fsg(const AffinityMatrix& affinity) {
  bool all_zero = true;
  for (int i = 0; i < affinity.m && all_zero; ++i) {
    for (int j = 0; j < affinity.m; ++j) {
      if (affinity.at(i, j) != 0.0) {
        all_zero = false;
        break;
      }
    }
  }
  if (all_zero) {
    std::cerr << "detect_fsg: degenerate all-zero affinity, returning 1\n";
    return 1.0;
  }
  const Spectrum s = normalized_laplacian_spectrum(affinity);
  return std::clamp(1.0 - s.lambda2, 0.0, 1.0);
}

double detect_exif(const AffinityMatrix& affinity) {
  const int m = affinity.m;
  if (m < 2) throw std::invalid_argument("detect_exif: need at least two blocks");
  double sum = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if (i != j) sum += affinity.at(i, j);
    }
  }
  return 1.0 - sum / (static_cast<double>(m) * (m - 1));
}

namespace {

Heatmap accumulate_heatmap(const std::vector<int>& spliced, const AnalysisBlockGrid& grid,
                           int height, int width, std::string provenance) {
  Heatmap h;
  h.height = height;
  h.width = width;
  h.values.assign(static_cast<std::size_t>(height) * width, 0.0);
  h.provenance = std::move(provenance);
  std::vector<int> cover(h.values.size(), 0);
  for (std::size_t b = 0; b < grid.origins.size(); ++b) {
    const auto& [r, c] = grid.origins[b];
    for (int y = r; y < r + grid.block_size; ++y) {
      for (int x = c; x < c + grid.block_size; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        h.values[i] += spliced[b];
        cover[i] += 1;
      }
    }
  }
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    if (cover[i] > 0) h.values[i] /= cover[i];
  }
  return h;
}

/// Bipartition -> spliced indicator. The smaller side is spliced; on a tie
/// the community containing block 0 counts as authentic.
std::vector<int> minority_indicator(const std::vector<int>& side, int m) {
  int n1 = 0;
  for (int v : side) n1 += v;
  const int n0 = m - n1;
  const int spliced_side = n1 < n0 ? 1 : (n0 < n1 ? 0 : 1 - side[0]);
  std::vector<int> out(m, 0);
  for (int i = 0; i < m; ++i) out[i] = side[i] == spliced_side ? 1 : 0;
  return out;
}

}  // namespace

Heatmap localize_fsg(const AffinityMatrix& affinity, int height, int width) {
  const Spectrum s = normalized_laplacian_spectrum(affinity);
  const int m = affinity.m;
  // Bipartition on the Fiedler vector, cutting at the largest gap between
  // sorted entries. A plain sign split misreads near-zero entries when one
  // community is much smaller; the gap cut recovers clean partitions exactly
  // and coincides with the sign split when the gap straddles zero.
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return s.fiedler[a] < s.fiedler[b]; });
  int cut = m / 2;
  double best_gap = -1.0;
  for (int i = 0; i + 1 < m; ++i) {
    const double gap = s.fiedler[order[i + 1]] - s.fiedler[order[i]];
    if (gap > best_gap) {
      best_gap = gap;
      cut = i + 1;
    }
  }
  std::vector<int> side(m, 0);
  for (int i = cut; i < m; ++i) side[order[i]] = 1;
  return accumulate_heatmap(minority_indicator(side, m), affinity.grid, height, width, "fsg");
}

std::vector<int> mean_shift_cluster(const std::vector<double>& points, int n, int dim,
                                    int* n_clusters) {
  if (n <= 0) throw std::invalid_argument("mean_shift: no points");
  // pairwise distances via gram matrix
  std::vector<double> gram(static_cast<std::size_t>(n) * n, 0.0);
  nn::detail::gemm(false, true, n, n, dim, 1.0, points.data(), dim, points.data(), dim, 0.0,
                   gram.data(), n);
  auto dist2 = [&](int i, int j) {
    const double d = gram[static_cast<std::size_t>(i) * n + i] +
                     gram[static_cast<std::size_t>(j) * n + j] -
                     2.0 * gram[static_cast<std::size_t>(i) * n + j];
    return d > 0.0 ? d : 0.0;
  };
  std::vector<double> pair_d;
  pair_d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pair_d.push_back(std::sqrt(dist2(i, j)));
  }
  double bandwidth = 0.0;
  if (!pair_d.empty()) {
    std::nth_element(pair_d.begin(), pair_d.begin() + pair_d.size() / 2, pair_d.end());
    bandwidth = pair_d[pair_d.size() / 2];
  }
  if (bandwidth <= 0.0) {
    // all points coincide: one cluster
    if (n_clusters) *n_clusters = 1;
    return std::vector<int>(n, 0);
  }
  const double bw2 = bandwidth * bandwidth;

  // flat-kernel shifts toward the mean of original points within the
  // bandwidth; the neighbor indicator turns the shift into one matrix product
  std::vector<double> modes = points;
  std::vector<double> indicator(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<double> next(static_cast<std::size_t>(n) * dim, 0.0);
  std::vector<char> active(n, 1);
  std::vector<double> pt_norm(n, 0.0);
  for (int i = 0; i < n; ++i) pt_norm[i] = gram[static_cast<std::size_t>(i) * n + i];
  std::vector<double> cross(static_cast<std::size_t>(n) * n, 0.0);

  for (int iter = 0; iter < 50; ++iter) {
    bool moved = false;
    nn::detail::gemm(false, true, n, n, dim, 1.0, modes.data(), dim, points.data(), dim, 0.0,
                     cross.data(), n);
    std::vector<int> counts(n, 0);
    for (int i = 0; i < n; ++i) {
      double* ind = indicator.data() + static_cast<std::size_t>(i) * n;
      if (!active[i]) {
        std::fill(ind, ind + n, 0.0);
        continue;
      }
      double mode_norm = 0.0;
      for (int d = 0; d < dim; ++d) {
        mode_norm += modes[static_cast<std::size_t>(i) * dim + d] *
                     modes[static_cast<std::size_t>(i) * dim + d];
      }
      const double* cr = cross.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) {
        const bool in = mode_norm + pt_norm[j] - 2.0 * cr[j] <= bw2;
        ind[j] = in ? 1.0 : 0.0;
        counts[i] += in;
      }
    }
    nn::detail::gemm(false, false, n, dim, n, 1.0, indicator.data(), n, points.data(), dim, 0.0,
                     next.data(), dim);
    for (int i = 0; i < n; ++i) {
      if (!active[i] || counts[i] == 0) continue;
      double move2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double v = next[static_cast<std::size_t>(i) * dim + d] / counts[i];
        const double diff = v - modes[static_cast<std::size_t>(i) * dim + d];
        move2 += diff * diff;
        modes[static_cast<std::size_t>(i) * dim + d] = v;
      }
      if (move2 < 1e-12 * bw2) {
        active[i] = 0;
      } else {
        moved = true;
      }
    }
    if (!moved) break;
  }

  // group converged modes within half a bandwidth
  std::vector<int> labels(n, -1);
  std::vector<std::vector<double>> reps;
  for (int i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < reps.size(); ++r) {
      double d2 = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double diff = modes[static_cast<std::size_t>(i) * dim + d] - reps[r][d];
        d2 += diff * diff;
      }
      if (d2 <= 0.25 * bw2) {
        labels[i] = static_cast<int>(r);
        break;
      }
    }
    if (labels[i] < 0) {
      labels[i] = static_cast<int>(reps.size());
      reps.emplace_back(modes.begin() + static_cast<std::size_t>(i) * dim,
                        modes.begin() + static_cast<std::size_t>(i + 1) * dim);
    }
  }
  if (n_clusters) *n_clusters = static_cast<int>(reps.size());
  return labels;
}

Heatmap localize_exif(const AffinityMatrix& affinity, int height, int width) {
  const int m = affinity.m;
  int n_clusters = 0;
  const std::vector<int> labels = mean_shift_cluster(affinity.scores, m, m, &n_clusters);
  if (n_clusters <= 1) {
    std::cerr << "localize_exif: mean shift found a single cluster, empty heatmap\n";
    Heatmap h;
    h.height = height;
    h.width = width;
    h.values.assign(static_cast<std::size_t>(height) * width, 0.0);
    h.provenance = "exif";
    return h;
  }
  // the largest cluster is authentic; everything else is spliced. Two equal
  // largest clusters: the one containing block 0 counts as authentic.
  std::vector<int> counts(n_clusters, 0);
  for (int l : labels) counts[l] += 1;
  int authentic = 0;
  for (int c = 1; c < n_clusters; ++c) {
    if (counts[c] > counts[authentic]) authentic = c;
  }
  if (counts[labels[0]] == counts[authentic]) authentic = labels[0];
  std::vector<int> spliced(m, 0);
  for (int i = 0; i < m; ++i) spliced[i] = labels[i] == authentic ? 0 : 1;
  Heatmap h = accumulate_heatmap(spliced, affinity.grid, height, width, "exif");
  return h;
}

}  // namespace traceforge::forensics
