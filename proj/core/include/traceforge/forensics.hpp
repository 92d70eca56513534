#pragma once

#include <string>
#include <utility>
#include <vector>

#include "traceforge/models.hpp"

namespace traceforge::forensics {

/// Overlapping analysis-block geometry. `sampling_patches` blocks span the
/// longest image dimension (first at 0, last flush with the edge); the
/// shorter dimension gets a proportional count, at least one.
struct AnalysisBlockGrid {
  int block_size = kPatchSize;
  int sampling_patches = 30;
  int rows = 0;
  int cols = 0;
  std::vector<std::pair<int, int>> origins;  // (row, col), row-major

  static AnalysisBlockGrid build(int height, int width, int block_size = kPatchSize,
                                 int sampling_patches = 30);
};

/// Pairwise similarity scores between grid blocks. Exactly symmetric with a
/// unit diagonal; one Siamese evaluation per unordered block pair.
struct AffinityMatrix {
  int m = 0;
  std::vector<double> scores;
  AnalysisBlockGrid grid;
  long pairs_evaluated = 0;

  double& at(int i, int j) { return scores[static_cast<std::size_t>(i) * m + j]; }
  double at(int i, int j) const { return scores[static_cast<std::size_t>(i) * m + j]; }
};

struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // in [0,1]
  std::string provenance;

  double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

std::vector<Patch> sample_grid(const RgbImage& image, const AnalysisBlockGrid& grid);

AffinityMatrix build_affinity(const nets::Siamese<float>& net, const std::vector<Patch>& patches);

/// Grid sampling + affinity in one step (embeddings computed once per block).
AffinityMatrix analyze_image(const nets::Siamese<float>& net, const RgbImage& image,
                             const AnalysisBlockGrid& grid);

/// Smallest two eigenvalues of the symmetric normalized Laplacian plus the
/// eigenvector of the second one.
struct Spectrum {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> fiedler;
};
Spectrum normalized_laplacian_spectrum(const AffinityMatrix& affinity);

/// Community-structure statistic: 1 - lambda2, clamped to [0,1]. Two loosely
/// coupled block groups drive lambda2 toward 0 and the score toward 1.
double detect_fsg(const AffinityMatrix& affinity);

/// Self-consistency statistic: 1 - mean off-diagonal affinity.
double detect_exif(const AffinityMatrix& affinity);

/// Fiedler-vector bipartition (largest-gap cut); the smaller community is
/// marked spliced and blended into a per-pixel coverage average.
Heatmap localize_fsg(const AffinityMatrix& affinity, int height, int width);

/// Mean-shift clustering of affinity rows (flat kernel, bandwidth = median
/// pairwise distance); everything outside the largest cluster is spliced.
Heatmap localize_exif(const AffinityMatrix& affinity, int height, int width);

/// Flat-kernel mean shift over n points of dimension dim (row-major). Returns
/// cluster labels; sets *n_clusters when non-null.
std::vector<int> mean_shift_cluster(const std::vector<double>& points, int n, int dim,
                                    int* n_clusters = nullptr);

}  // namespace traceforge::forensics
