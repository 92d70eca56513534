#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace traceforge {

inline constexpr int kPatchSize = 128;
inline constexpr int kUnknownLabel = -1;

/// Floating point H x W x 3 image with values in [0, 1], channel order RGB.
/// The universal pixel carrier; 8-bit only exists at the PNG boundary.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major, interleaved RGB

  RgbImage() = default;
  RgbImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

  bool same_shape(const RgbImage& o) const { return height == o.height && width == o.width; }

  void clamp01() {
    for (double& v : pixels) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
};

/// Binary per-pixel map; 1 marks the spliced / attacked region.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> values;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

  std::size_t count_ones() const {
    std::size_t n = 0;
    for (auto v : values) n += (v != 0);
    return n;
  }
};

/// Square crop with its source camera label and position in the parent image.
/// Model entry points require kPatchSize x kPatchSize.
struct Patch {
  RgbImage pixels;
  int source_label = kUnknownLabel;
  int origin_row = 0;
  int origin_col = 0;
};

struct PatchPair {
  Patch a;
  Patch b;
  bool same_source = false;
};

/// Non-overlapping row-major tiling of the top-left region; trailing pixels
/// that do not fill a full patch are discarded.
std::vector<Patch> extract_patches(const RgbImage& image, int size);

/// PNG I/O. Load maps 8-bit values to [0,1] by /255; save rounds half up and
/// clamps, so save(load(x)) is bit identical for every 8-bit RGB PNG.
RgbImage load_image(const std::string& path);
void save_image(const RgbImage& image, const std::string& path);

/// Grayscale PNG helpers for masks and heatmaps.
Mask load_mask(const std::string& path);
void save_mask(const Mask& mask, const std::string& path);
void save_gray(const std::vector<double>& values, int height, int width, const std::string& path);

std::uint8_t quantize8(double v);

/// 8-bit quantization of a whole image (the representation patches are stored
/// in; identical to a PNG save/load round trip).
std::vector<std::uint8_t> to_bytes(const RgbImage& image);
RgbImage from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width);

}  // namespace traceforge
