#include "traceforge/synthcam.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace traceforge::synthcam {

namespace fs = std::filesystem;
using json = nlohmann::json;

void validate_profile(const CameraProfile& p) {
  double sum = 0.0;
  for (double k : p.demosaic_kernel) sum += k;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("camera profile " + std::to_string(p.id) +
                                ": demosaic kernel must have unit DC gain");
  }
  if (p.jpeg_quality != -1 && (p.jpeg_quality < 60 || p.jpeg_quality > 100)) {
    throw std::invalid_argument("camera profile: jpeg quality must be -1 or in [60,100]");
  }
  if (p.noise_std < 0.0) throw std::invalid_argument("camera profile: noise_std must be >= 0");
  if (p.gamma <= 0.0) throw std::invalid_argument("camera profile: gamma must be > 0");
}

bool same_hardware(const CameraProfile& a, const CameraProfile& b) {
  return a.demosaic_kernel == b.demosaic_kernel && a.gamma == b.gamma && a.noise_std == b.noise_std;
}

namespace {

CameraProfile make_profile(int id, std::array<double, 9> kernel, double gamma, double noise,
                           int quality) {
  CameraProfile p;
  p.id = id;
  p.demosaic_kernel = kernel;
  p.gamma = gamma;
  p.noise_std = noise;
  p.jpeg_quality = quality;
  validate_profile(p);
  return p;
}

constexpr std::array<double, 9> kIdentity{0, 0, 0, 0, 1, 0, 0, 0, 0};
constexpr std::array<double, 9> kCrossBlur{0, 0.08, 0, 0.08, 0.68, 0.08, 0, 0.08, 0};
constexpr std::array<double, 9> kHorizontal{0, 0, 0, 0.15, 0.70, 0.15, 0, 0, 0};
constexpr std::array<double, 9> kSharpen{0, -0.06, 0, -0.06, 1.24, -0.06, 0, -0.06, 0};
constexpr std::array<double, 9> kDiagonal{0.05, 0, 0.05, 0, 0.80, 0, 0.05, 0, 0.05};
constexpr std::array<double, 9> kVertical{0, 0.12, 0, 0, 0.76, 0, 0, 0.12, 0};

}  // namespace

std::vector<CameraProfile> default_seen_profiles() {
  // Four hardware pipelines; hw1 and hw3 each ship at two JPEG qualities, so
  // quality-sensitive and quality-insensitive source notions differ.
  return {
      make_profile(0, kIdentity, 1.00, 0.004, -1),
      make_profile(1, kCrossBlur, 0.92, 0.010, 95),
      make_profile(2, kHorizontal, 1.08, 0.006, 85),
      make_profile(3, kSharpen, 1.00, 0.014, 75),
      make_profile(4, kCrossBlur, 0.92, 0.010, 75),
      make_profile(5, kSharpen, 1.00, 0.014, 95),
  };
}

std::vector<CameraProfile> default_unseen_profiles() {
  return {
      make_profile(6, kDiagonal, 1.15, 0.008, 90),
      make_profile(7, kVertical, 0.85, 0.018, -1),
  };
}

namespace {

// reflect-padded 3x3 convolution, per channel
RgbImage convolve3(const RgbImage& img, const std::array<double, 9>& k) {
  RgbImage out(img.height, img.width);
  const int h = img.height, w = img.width;
  auto reflect = [](int v, int n) { return v < 0 ? -v : (v >= n ? 2 * n - 2 - v : v); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            acc += k[ky * 3 + kx] * img.at(reflect(y + ky - 1, h), reflect(x + kx - 1, w), c);
          }
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

// JPEG base quantization tables (luminance / chrominance)
constexpr int kLumaQ[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                            14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                            18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                            49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
constexpr int kChromaQ[64] = {17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
                              24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
                              99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
                              99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

void scaled_table(const int* base, int quality, double* out) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  for (int i = 0; i < 64; ++i) {
    int q = (base[i] * scale + 50) / 100;
    out[i] = std::clamp(q, 1, 255);
  }
}

struct Dct8 {
  double c[8][8];
  Dct8() {
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) c[k][n] = a * std::cos(M_PI * (n + 0.5) * k / 8.0);
    }
  }
};

const Dct8& dct8() {
  static const Dct8 d;
  return d;
}

void quantize_channel(std::vector<double>& ch, int h, int w, const double* q) {
  const Dct8& d = dct8();
  const int bh = (h + 7) / 8, bw = (w + 7) / 8;
  auto sample = [&](int y, int x) {
    return ch[static_cast<std::size_t>(std::min(y, h - 1)) * w + std::min(x, w - 1)];
  };
  for (int by = 0; by < bh; ++by) {
    for (int bx = 0; bx < bw; ++bx) {
      double blk[8][8], tmp[8][8], coef[8][8];
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) blk[y][x] = sample(by * 8 + y, bx * 8 + x) * 255.0 - 128.0;
      }
      // coef = C * blk * C^T
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          double acc = 0.0;
          for (int n = 0; n < 8; ++n) acc += d.c[x][n] * blk[y][n];
          tmp[y][x] = acc;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          double acc = 0.0;
          for (int n = 0; n < 8; ++n) acc += d.c[y][n] * tmp[n][x];
          coef[y][x] = acc;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          const double qv = q[y * 8 + x];
          coef[y][x] = std::round(coef[y][x] / qv) * qv;
        }
      }
      // blk = C^T * coef * C
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          double acc = 0.0;
          for (int n = 0; n < 8; ++n) acc += d.c[n][x] * coef[y][n];
          tmp[y][x] = acc;
        }
      }
      for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
          double acc = 0.0;
          for (int n = 0; n < 8; ++n) acc += d.c[n][y] * tmp[n][x];
          blk[y][x] = acc;
        }
      }
      for (int y = 0; y < 8 && by * 8 + y < h; ++y) {
        for (int x = 0; x < 8 && bx * 8 + x < w; ++x) {
          ch[static_cast<std::size_t>(by * 8 + y) * w + bx * 8 + x] = (blk[y][x] + 128.0) / 255.0;
        }
      }
    }
  }
}

}  // namespace

RgbImage jpeg_roundtrip(const RgbImage& image, int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg quality out of range");
  const int h = image.height, w = image.width;
  std::vector<double> yc(static_cast<std::size_t>(h) * w), cb(yc.size()), cr(yc.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = image.at(y, x, 0), g = image.at(y, x, 1), b = image.at(y, x, 2);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      yc[i] = 0.299 * r + 0.587 * g + 0.114 * b;
      cb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 0.5;
      cr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 0.5;
    }
  }
  double lq[64], cq[64];
  scaled_table(kLumaQ, quality, lq);
  scaled_table(kChromaQ, quality, cq);
  quantize_channel(yc, h, w, lq);
  quantize_channel(cb, h, w, cq);
  quantize_channel(cr, h, w, cq);
  RgbImage out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double Y = yc[i], Cb = cb[i] - 0.5, Cr = cr[i] - 0.5;
      out.at(y, x, 0) = Y + 1.402 * Cr;
      out.at(y, x, 1) = Y - 0.344136 * Cb - 0.714136 * Cr;
      out.at(y, x, 2) = Y + 1.772 * Cb;
    }
  }
  out.clamp01();
  return out;
}

RgbImage apply_camera(const RgbImage& image, const CameraProfile& profile, RngSeed seed) {
  validate_profile(profile);
  RgbImage out = convolve3(image, profile.demosaic_kernel);
  // gamma operates on the clamped intermediate so the power is well defined
  for (double& v : out.pixels) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    v = std::pow(c, profile.gamma);
  }
  if (profile.noise_std > 0.0) {
    Rng rng(seed);
    for (double& v : out.pixels) v += rng.normal(0.0, profile.noise_std);
  }
  if (profile.jpeg_quality != -1) {
    out.clamp01();
    out = jpeg_roundtrip(out, profile.jpeg_quality);
  }
  out.clamp01();
  return out;
}

RgbImage make_base_image(int height, int width, Rng& rng) {
  RgbImage img(height, width);
  // base gradient between two colors along a random direction
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.15, 0.85);
    c1[c] = rng.uniform(0.15, 0.85);
  }
  const double ang = rng.uniform(0.0, 2.0 * M_PI);
  const double dx = std::cos(ang), dy = std::sin(ang);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double t = (dx * x / width + dy * y / height + 1.0) * 0.5;
      t = std::clamp(t, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = c0[c] + t * (c1[c] - c0[c]);
    }
  }
  // band-limited clouds: coarse noise grids upsampled bilinearly
  const int octaves = rng.uniform_int(1, 2);
  for (int o = 0; o < octaves; ++o) {
    const int gw = rng.uniform_int(6, 24), gh = rng.uniform_int(6, 24);
    const double amp = rng.uniform(0.04, 0.16);
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw * 3);
    for (double& g : grid) g = rng.uniform(-amp, amp);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / height * (gh - 1);
      const int y0 = static_cast<int>(fy);
      const int y1 = std::min(y0 + 1, gh - 1);
      const double ty = fy - y0;
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / width * (gw - 1);
        const int x0 = static_cast<int>(fx);
        const int x1 = std::min(x0 + 1, gw - 1);
        const double tx = fx - x0;
        for (int c = 0; c < 3; ++c) {
          const double v00 = grid[(static_cast<std::size_t>(y0) * gw + x0) * 3 + c];
          const double v01 = grid[(static_cast<std::size_t>(y0) * gw + x1) * 3 + c];
          const double v10 = grid[(static_cast<std::size_t>(y1) * gw + x0) * 3 + c];
          const double v11 = grid[(static_cast<std::size_t>(y1) * gw + x1) * 3 + c];
          img.at(y, x, c) +=
              (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
        }
      }
    }
  }
  // a few solid shapes
  const int shapes = rng.uniform_int(2, 6);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.5;
    const double alpha = rng.uniform(0.45, 1.0);
    double col[3];
    for (int c = 0; c < 3; ++c) col[c] = rng.uniform(0.1, 0.9);
    const int cw = rng.uniform_int(width / 8, width / 2);
    const int ch = rng.uniform_int(height / 8, height / 2);
    const int cx = rng.uniform_int(0, width - 1);
    const int cy = rng.uniform_int(0, height - 1);
    for (int y = std::max(0, cy - ch / 2); y < std::min(height, cy + ch / 2); ++y) {
      for (int x = std::max(0, cx - cw / 2); x < std::min(width, cx + cw / 2); ++x) {
        if (ellipse) {
          const double ny = (y - cy) / (ch / 2.0), nx = (x - cx) / (cw / 2.0);
          if (nx * nx + ny * ny > 1.0) continue;
        }
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1 - alpha) * img.at(y, x, c) + alpha * col[c];
      }
    }
  }
  // occasional plaid
  if (rng.uniform() < 0.3) {
    const double amp = rng.uniform(0.02, 0.06);
    const double fx = rng.uniform(2.0, 12.0), fy = rng.uniform(2.0, 12.0);
    const double ph = rng.uniform(0.0, 2.0 * M_PI);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double v = amp * std::sin(2.0 * M_PI * (fx * x / width + fy * y / height) + ph);
        for (int c = 0; c < 3; ++c) img.at(y, x, c) += v;
      }
    }
  }
  // keep away from hard saturation so every downstream trace survives
  for (double& v : img.pixels) v = std::clamp(v, 0.05, 0.95);
  return img;
}

std::string to_string(SplitGroup g) { return g == SplitGroup::seen ? "seen" : "unseen"; }
std::string to_string(SplitRole r) {
  switch (r) {
    case SplitRole::train: return "train";
    case SplitRole::val: return "val";
    default: return "test";
  }
}

Patch PatchRecord::to_patch() const {
  Patch p;
  p.pixels = from_bytes(pixels8, kPatchSize, kPatchSize);
  p.source_label = camera_id;
  p.origin_row = origin_row;
  p.origin_col = origin_col;
  return p;
}

const DatasetSplit* Dataset::find(SplitGroup g, SplitRole r) const {
  for (const auto& s : splits) {
    if (s.group == g && s.role == r) return &s;
  }
  return nullptr;
}

const CameraProfile* Dataset::profile_by_id(int id) const {
  for (const auto& p : profiles_seen) {
    if (p.id == id) return &p;
  }
  for (const auto& p : profiles_unseen) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

int Dataset::hardware_group(int profile_id) const {
  const CameraProfile* p = profile_by_id(profile_id);
  if (!p) return -1;
  std::vector<const CameraProfile*> all;
  for (const auto& q : profiles_seen) all.push_back(&q);
  for (const auto& q : profiles_unseen) all.push_back(&q);
  std::vector<const CameraProfile*> reps;
  for (const CameraProfile* q : all) {
    bool found = false;
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (same_hardware(*q, *reps[i])) {
        found = true;
        break;
      }
    }
    if (!found) reps.push_back(q);
  }
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (same_hardware(*p, *reps[i])) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> Dataset::seen_ids() const {
  std::vector<int> out;
  for (const auto& p : profiles_seen) out.push_back(p.id);
  return out;
}

std::vector<int> Dataset::unseen_ids() const {
  std::vector<int> out;
  for (const auto& p : profiles_unseen) out.push_back(p.id);
  return out;
}

Dataset build_splits(const std::vector<RgbImage>& base_images,
                     const std::vector<CameraProfile>& profiles_seen,
                     const std::vector<CameraProfile>& profiles_unseen, const SplitCounts& counts,
                     RngSeed seed) {
  for (const auto& p : profiles_seen) validate_profile(p);
  for (const auto& p : profiles_unseen) validate_profile(p);
  for (std::size_t i = 0; i < profiles_seen.size(); ++i) {
    for (std::size_t j = i + 1; j < profiles_seen.size(); ++j) {
      if (profiles_seen[i].id == profiles_seen[j].id) {
        throw std::invalid_argument("duplicate profile id");
      }
    }
  }

  Rng rng(seed);
  std::vector<int> order(base_images.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order);

  Dataset ds;
  ds.profiles_seen = profiles_seen;
  ds.profiles_unseen = profiles_unseen;
  ds.splits = {
      {SplitGroup::seen, SplitRole::train, {}},
      {SplitGroup::seen, SplitRole::val, {}},
      {SplitGroup::seen, SplitRole::test, {}},
  };
  if (!profiles_unseen.empty()) ds.splits.push_back({SplitGroup::unseen, SplitRole::test, {}});

  std::size_t next_image = 0;
  auto fill = [&](DatasetSplit& split, const CameraProfile& prof, int want) {
    int have = 0;
    while (have < want) {
      if (next_image >= order.size()) {
        throw std::runtime_error("insufficient base images: profile " + std::to_string(prof.id) +
                                 " role " + to_string(split.role) + " still needs " +
                                 std::to_string(want - have) + " patches");
      }
      const int img_id = order[next_image++];
      const RgbImage& base = base_images[img_id];
      if (base.height < kPatchSize || base.width < kPatchSize) continue;
      const RgbImage developed =
          apply_camera(base, prof, RngSeed{rng.derive(static_cast<std::uint64_t>(img_id)).seed()});
      const std::vector<std::uint8_t> bytes = to_bytes(developed);
      const int rows = developed.height / kPatchSize;
      const int cols = developed.width / kPatchSize;
      for (int r = 0; r < rows && have < want; ++r) {
        for (int c = 0; c < cols && have < want; ++c) {
          PatchRecord rec;
          rec.camera_id = prof.id;
          rec.image_id = img_id;
          rec.origin_row = r * kPatchSize;
          rec.origin_col = c * kPatchSize;
          rec.pixels8.resize(static_cast<std::size_t>(kPatchSize) * kPatchSize * 3);
          for (int y = 0; y < kPatchSize; ++y) {
            const std::size_t src =
                (static_cast<std::size_t>(rec.origin_row + y) * developed.width + rec.origin_col) *
                3;
            std::copy_n(bytes.begin() + src, static_cast<std::size_t>(kPatchSize) * 3,
                        rec.pixels8.begin() + static_cast<std::size_t>(y) * kPatchSize * 3);
          }
          split.patches.push_back(std::move(rec));
          ++have;
        }
      }
    }
  };

  for (const auto& prof : profiles_seen) {
    fill(ds.splits[0], prof, counts.train);
    fill(ds.splits[1], prof, counts.val);
    fill(ds.splits[2], prof, counts.test);
  }
  for (const auto& prof : profiles_unseen) {
    fill(ds.splits[3], prof, counts.test);
  }
  return ds;
}

Dataset generate_dataset(const DatasetConfig& config, RngSeed seed) {
  const int per_image = (config.base_height / kPatchSize) * (config.base_width / kPatchSize);
  if (per_image < 1) throw std::invalid_argument("base image smaller than a patch");
  auto needed = [&](int count) { return (count + per_image - 1) / per_image; };
  std::size_t total = 0;
  for (std::size_t i = 0; i < config.profiles_seen.size(); ++i) {
    total += needed(config.counts.train) + needed(config.counts.val) + needed(config.counts.test);
  }
  total += config.profiles_unseen.size() * needed(config.counts.test);

  Rng rng = Rng(seed).derive(0xbabe);
  std::vector<RgbImage> base;
  base.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    Rng img_rng = rng.derive(i);
    base.push_back(make_base_image(config.base_height, config.base_width, img_rng));
  }
  return build_splits(base, config.profiles_seen, config.profiles_unseen, config.counts, seed);
}

Mask random_mask(int height, int width, Rng& rng, double min_frac, double max_frac) {
  Mask m(height, width);
  const double frac = rng.uniform(min_frac, max_frac);
  const double area = frac * height * width;
  const bool ellipse = rng.uniform() < 0.5;
  const double aspect = rng.uniform(0.6, 1.7);
  double rw = std::sqrt(area * aspect);
  double rh = area / rw;
  if (ellipse) {
    // pi*a*b = area
    rw *= 2.0 / std::sqrt(M_PI);
    rh *= 2.0 / std::sqrt(M_PI);
  }
  int iw = std::min(static_cast<int>(std::lround(rw)), width);
  int ih = std::min(static_cast<int>(std::lround(rh)), height);
  iw = std::max(iw, 4);
  ih = std::max(ih, 4);
  const int x0 = rng.uniform_int(0, width - iw);
  const int y0 = rng.uniform_int(0, height - ih);
  if (ellipse) {
    const double cx = x0 + iw / 2.0, cy = y0 + ih / 2.0;
    for (int y = y0; y < y0 + ih; ++y) {
      for (int x = x0; x < x0 + iw; ++x) {
        const double nx = (x - cx) / (iw / 2.0), ny = (y - cy) / (ih / 2.0);
        if (nx * nx + ny * ny <= 1.0) m.at(y, x) = 1;
      }
    }
  } else {
    for (int y = y0; y < y0 + ih; ++y) {
      for (int x = x0; x < x0 + iw; ++x) m.at(y, x) = 1;
    }
  }
  return m;
}

SpliceSample make_splice(const RgbImage& host, const RgbImage& donor, const Mask& mask,
                         const CameraProfile& host_profile, const CameraProfile& donor_profile,
                         RngSeed seed) {
  if (!host.same_shape(donor) || host.height != mask.height || host.width != mask.width) {
    throw std::invalid_argument("make_splice: host, donor and mask shapes must match");
  }
  Rng rng(seed);
  const RgbImage dev_host = apply_camera(host, host_profile, RngSeed{rng.derive(1).seed()});
  const RgbImage dev_donor = apply_camera(donor, donor_profile, RngSeed{rng.derive(2).seed()});
  SpliceSample s;
  s.image = dev_host;
  s.mask = mask;
  s.host_profile_id = host_profile.id;
  s.donor_profile_id = donor_profile.id;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x)) {
        for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = dev_donor.at(y, x, c);
      }
    }
  }
  return s;
}

SpliceBenchmark make_benchmark(const std::vector<CameraProfile>& profiles,
                               const BenchmarkConfig& config, RngSeed seed) {
  if (profiles.size() < 2) throw std::invalid_argument("benchmark needs at least two profiles");
  // ordered profile pairs on different hardware
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    for (std::size_t j = 0; j < profiles.size(); ++j) {
      if (i != j && !same_hardware(profiles[i], profiles[j])) {
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  if (pairs.empty()) throw std::invalid_argument("benchmark needs two distinct hardware pipelines");

  Rng rng(seed);
  SpliceBenchmark bench;
  for (int n = 0; n < config.n_spliced; ++n) {
    Rng r = rng.derive(1000 + n);
    const auto [hi, di] = pairs[r.index(pairs.size())];
    const RgbImage host = make_base_image(config.image_height, config.image_width, r);
    const RgbImage donor = make_base_image(config.image_height, config.image_width, r);
    const Mask mask =
        random_mask(config.image_height, config.image_width, r, config.mask_min_frac, config.mask_max_frac);
    bench.spliced.push_back(
        make_splice(host, donor, mask, profiles[hi], profiles[di], RngSeed{r.derive(7).seed()}));
  }
  for (int n = 0; n < config.n_authentic; ++n) {
    Rng r = rng.derive(5000 + n);
    const int pi = static_cast<int>(r.index(profiles.size()));
    const RgbImage content = make_base_image(config.image_height, config.image_width, r);
    bench.authentic.push_back(apply_camera(content, profiles[pi], RngSeed{r.derive(7).seed()}));
    bench.authentic_profile_ids.push_back(profiles[pi].id);
  }
  return bench;
}

namespace {

json profile_json(const CameraProfile& p) {
  return json{{"id", p.id},
              {"demosaic_kernel", p.demosaic_kernel},
              {"jpeg_quality", p.jpeg_quality},
              {"noise_std", p.noise_std},
              {"gamma", p.gamma}};
}

CameraProfile profile_from_json(const json& j) {
  CameraProfile p;
  p.id = j.at("id").get<int>();
  const auto k = j.at("demosaic_kernel").get<std::vector<double>>();
  if (k.size() != 9) throw std::runtime_error("profile kernel must have 9 entries");
  std::copy(k.begin(), k.end(), p.demosaic_kernel.begin());
  p.jpeg_quality = j.at("jpeg_quality").get<int>();
  p.noise_std = j.at("noise_std").get<double>();
  p.gamma = j.at("gamma").get<double>();
  validate_profile(p);
  return p;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& directory) {
  fs::create_directories(directory);
  std::ofstream manifest(fs::path(directory) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + directory);
  json header{{"kind", "patch_dataset"},
              {"profiles_seen", json::array()},
              {"profiles_unseen", json::array()}};
  for (const auto& p : dataset.profiles_seen) header["profiles_seen"].push_back(profile_json(p));
  for (const auto& p : dataset.profiles_unseen) header["profiles_unseen"].push_back(profile_json(p));
  manifest << header.dump() << "\n";

  for (const auto& split : dataset.splits) {
    const std::string split_name = to_string(split.group) + "_" + to_string(split.role);
    int index = 0;
    for (const auto& rec : split.patches) {
      const fs::path dir = fs::path(directory) / split_name / std::to_string(rec.camera_id);
      fs::create_directories(dir);
      std::ostringstream name;
      name << std::setw(6) << std::setfill('0') << index++ << ".png";
      const fs::path file = dir / name.str();
      save_image(from_bytes(rec.pixels8, kPatchSize, kPatchSize), file.string());
      manifest << json{{"path", fs::relative(file, directory).string()},
                       {"group", to_string(split.group)},
                       {"role", to_string(split.role)},
                       {"camera_id", rec.camera_id},
                       {"image_id", rec.image_id},
                       {"origin", {rec.origin_row, rec.origin_col}}}
                      .dump()
               << "\n";
    }
  }
}

Dataset load_dataset(const std::string& directory) {
  std::ifstream manifest(fs::path(directory) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot read manifest in " + directory);
  std::string line;
  if (!std::getline(manifest, line)) throw std::runtime_error("empty manifest");
  const json header = json::parse(line);
  Dataset ds;
  for (const auto& j : header.at("profiles_seen")) ds.profiles_seen.push_back(profile_from_json(j));
  for (const auto& j : header.at("profiles_unseen")) {
    ds.profiles_unseen.push_back(profile_from_json(j));
  }
  auto split_of = [&](const std::string& group, const std::string& role) -> DatasetSplit& {
    const SplitGroup g = group == "seen" ? SplitGroup::seen : SplitGroup::unseen;
    const SplitRole r =
        role == "train" ? SplitRole::train : (role == "val" ? SplitRole::val : SplitRole::test);
    for (auto& s : ds.splits) {
      if (s.group == g && s.role == r) return s;
    }
    ds.splits.push_back({g, r, {}});
    return ds.splits.back();
  };
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    PatchRecord rec;
    rec.camera_id = j.at("camera_id").get<int>();
    rec.image_id = j.at("image_id").get<int>();
    rec.origin_row = j.at("origin")[0].get<int>();
    rec.origin_col = j.at("origin")[1].get<int>();
    const RgbImage img = load_image((fs::path(directory) / j.at("path").get<std::string>()).string());
    if (img.height != kPatchSize || img.width != kPatchSize) {
      throw std::runtime_error("stored patch has wrong size");
    }
    rec.pixels8 = to_bytes(img);
    split_of(j.at("group").get<std::string>(), j.at("role").get<std::string>())
        .patches.push_back(std::move(rec));
  }
  return ds;
}

void save_benchmark(const SpliceBenchmark& bench, const std::string& directory) {
  fs::create_directories(fs::path(directory) / "images");
  fs::create_directories(fs::path(directory) / "masks");
  std::ofstream manifest(fs::path(directory) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + directory);
  for (std::size_t i = 0; i < bench.spliced.size(); ++i) {
    std::ostringstream name;
    name << "spliced_" << std::setw(4) << std::setfill('0') << i << ".png";
    const std::string img_rel = "images/" + name.str();
    const std::string mask_rel = "masks/" + name.str();
    save_image(bench.spliced[i].image, (fs::path(directory) / img_rel).string());
    save_mask(bench.spliced[i].mask, (fs::path(directory) / mask_rel).string());
    manifest << json{{"kind", "spliced"},
                     {"image", img_rel},
                     {"mask", mask_rel},
                     {"host_profile", bench.spliced[i].host_profile_id},
                     {"donor_profile", bench.spliced[i].donor_profile_id}}
                    .dump()
             << "\n";
  }
  for (std::size_t i = 0; i < bench.authentic.size(); ++i) {
    std::ostringstream name;
    name << "authentic_" << std::setw(4) << std::setfill('0') << i << ".png";
    const std::string img_rel = "images/" + name.str();
    save_image(bench.authentic[i], (fs::path(directory) / img_rel).string());
    manifest << json{{"kind", "authentic"},
                     {"image", img_rel},
                     {"profile", bench.authentic_profile_ids[i]}}
                    .dump()
             << "\n";
  }
}

SpliceBenchmark load_benchmark(const std::string& directory) {
  std::ifstream manifest(fs::path(directory) / "manifest.jsonl");
  if (!manifest) throw std::runtime_error("cannot read manifest in " + directory);
  SpliceBenchmark bench;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.at("kind") == "spliced") {
      SpliceSample s;
      s.image = load_image((fs::path(directory) / j.at("image").get<std::string>()).string());
      s.mask = load_mask((fs::path(directory) / j.at("mask").get<std::string>()).string());
      s.host_profile_id = j.at("host_profile").get<int>();
      s.donor_profile_id = j.at("donor_profile").get<int>();
      bench.spliced.push_back(std::move(s));
    } else {
      bench.authentic.push_back(
          load_image((fs::path(directory) / j.at("image").get<std::string>()).string()));
      bench.authentic_profile_ids.push_back(j.at("profile").get<int>());
    }
  }
  return bench;
}

}  // namespace traceforge::synthcam
