#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "traceforge/image.hpp"
#include "traceforge/rng.hpp"
#include "traceforge/tensor.hpp"

namespace traceforge::synthcam {

/// One simulated camera model. The trace pipeline is fixed:
/// demosaic-style filtering -> gamma -> Gaussian read noise -> optional JPEG
/// requantization -> clamp. Profiles sharing (kernel, gamma, noise) describe
/// the same hardware at different compression settings.
struct CameraProfile {
  int id = 0;
  std::array<double, 9> demosaic_kernel{0, 0, 0, 0, 1, 0, 0, 0, 0};
  int jpeg_quality = -1;  // -1 = uncompressed, else in [60, 100]
  double noise_std = 0.0;
  double gamma = 1.0;
};

void validate_profile(const CameraProfile& p);
bool same_hardware(const CameraProfile& a, const CameraProfile& b);

/// The default desk-scale profile sets: six seen models over four hardware
/// pipelines (two hardware pipelines appear at two JPEG qualities), plus two
/// unseen models on fresh hardware.
std::vector<CameraProfile> default_seen_profiles();
std::vector<CameraProfile> default_unseen_profiles();

RgbImage apply_camera(const RgbImage& image, const CameraProfile& profile, RngSeed seed);

/// In-memory JPEG luma/chroma quantization round trip (blockwise 8x8 DCT with
/// the standard tables scaled by quality). Injects compression traces without
/// touching the on-disk format, which stays PNG.
RgbImage jpeg_roundtrip(const RgbImage& image, int quality);

/// Procedural base content: gradients, band-limited clouds, shapes, plaids.
RgbImage make_base_image(int height, int width, Rng& rng);

enum class SplitGroup { seen, unseen };
enum class SplitRole { train, val, test };

std::string to_string(SplitGroup g);
std::string to_string(SplitRole r);

/// One stored patch. Pixels are kept 8-bit, exactly the PNG representation,
/// so the in-memory pipeline and the on-disk pipeline see identical data.
struct PatchRecord {
  int camera_id = kUnknownLabel;
  int image_id = 0;
  int origin_row = 0;
  int origin_col = 0;
  std::vector<std::uint8_t> pixels8;  // kPatchSize * kPatchSize * 3

  Patch to_patch() const;
};

template <typename T>
nn::Tensor<T> record_tensor(const PatchRecord& r) {
  nn::Tensor<T> t(kPatchSize, kPatchSize, 3);
  for (std::size_t i = 0; i < r.pixels8.size(); ++i) t.v[i] = static_cast<T>(r.pixels8[i] / 255.0);
  return t;
}

struct DatasetSplit {
  SplitGroup group = SplitGroup::seen;
  SplitRole role = SplitRole::train;
  std::vector<PatchRecord> patches;
};

struct SplitCounts {
  int train = 1500;
  int val = 200;
  int test = 400;
};

struct Dataset {
  std::vector<CameraProfile> profiles_seen;
  std::vector<CameraProfile> profiles_unseen;
  std::vector<DatasetSplit> splits;

  const DatasetSplit* find(SplitGroup g, SplitRole r) const;
  const CameraProfile* profile_by_id(int id) const;
  /// Index of the hardware pipeline a profile belongs to (profiles with equal
  /// kernel/gamma/noise share an index). Unknown id -> -1.
  int hardware_group(int profile_id) const;
  std::vector<int> seen_ids() const;
  std::vector<int> unseen_ids() const;
};

/// Partitions base images over (profile, role), develops them with the
/// profile's pipeline and tiles them into non-overlapping patches. No base
/// image contributes to more than one role. Unseen profiles get test only.
Dataset build_splits(const std::vector<RgbImage>& base_images,
                     const std::vector<CameraProfile>& profiles_seen,
                     const std::vector<CameraProfile>& profiles_unseen, const SplitCounts& counts,
                     RngSeed seed);

struct DatasetConfig {
  std::vector<CameraProfile> profiles_seen = default_seen_profiles();
  std::vector<CameraProfile> profiles_unseen = default_unseen_profiles();
  SplitCounts counts;
  int base_height = 256;
  int base_width = 384;
};

/// Synthesizes base content internally and calls build_splits.
Dataset generate_dataset(const DatasetConfig& config, RngSeed seed);

/// Random rectangle or ellipse covering min_frac..max_frac of the image.
Mask random_mask(int height, int width, Rng& rng, double min_frac = 0.10, double max_frac = 0.40);

struct SpliceSample {
  RgbImage image;
  Mask mask;
  int host_profile_id = kUnknownLabel;
  int donor_profile_id = kUnknownLabel;
};

/// Composite of two developed images: donor pipeline inside the mask, host
/// pipeline outside. The mask is kept as ground truth.
SpliceSample make_splice(const RgbImage& host, const RgbImage& donor, const Mask& mask,
                         const CameraProfile& host_profile, const CameraProfile& donor_profile,
                         RngSeed seed);

struct BenchmarkConfig {
  int n_spliced = 60;
  int n_authentic = 60;
  int image_height = 192;
  int image_width = 256;
  double mask_min_frac = 0.10;
  double mask_max_frac = 0.40;
};

struct SpliceBenchmark {
  std::vector<SpliceSample> spliced;
  std::vector<RgbImage> authentic;
  std::vector<int> authentic_profile_ids;
};

/// Spliced + authentic evaluation images. Host and donor always come from
/// different hardware pipelines so every detector family sees a trace seam.
SpliceBenchmark make_benchmark(const std::vector<CameraProfile>& profiles,
                               const BenchmarkConfig& config, RngSeed seed);

/// Persist / restore a dataset as `<split>/<camera_id>/<index>.png` plus a
/// JSON-lines manifest (path, camera_id, origin, image_id).
void save_dataset(const Dataset& dataset, const std::string& directory);
Dataset load_dataset(const std::string& directory);

void save_benchmark(const SpliceBenchmark& bench, const std::string& directory);
SpliceBenchmark load_benchmark(const std::string& directory);

}  // namespace traceforge::synthcam
