#include "traceforge/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

namespace traceforge {

std::vector<Patch> extract_patches(const RgbImage& image, int size) {
  if (size < 1) throw std::invalid_argument("extract_patches: size must be >= 1");
  if (image.height < size || image.width < size) {
    throw std::invalid_argument("extract_patches: image too small");
  }
  const int rows = image.height / size;
  const int cols = image.width / size;
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      Patch p;
      p.pixels = RgbImage(size, size);
      p.origin_row = r * size;
      p.origin_col = c * size;
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          for (int ch = 0; ch < 3; ++ch) {
            p.pixels.at(y, x, ch) = image.at(p.origin_row + y, p.origin_col + x, ch);
          }
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::uint8_t quantize8(double v) {
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  // round half up
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

std::vector<std::uint8_t> to_bytes(const RgbImage& image) {
  std::vector<std::uint8_t> out(image.pixels.size());
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out[i] = quantize8(image.pixels[i]);
  return out;
}

RgbImage from_bytes(const std::vector<std::uint8_t>& bytes, int height, int width) {
  RgbImage img(height, width);
  if (bytes.size() != img.pixels.size()) throw std::invalid_argument("from_bytes: size mismatch");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.pixels[i] = bytes[i] / 255.0;
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void read_png_bytes(const std::string& path, int channels_wanted, int& height, int& width,
                    std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open for reading: " + path);

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw std::runtime_error("png_create_read_struct failed");
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(r.png))) throw std::runtime_error("failed to decode PNG: " + path);

  png_init_io(r.png, fp.get());
  png_read_info(r.png, r.info);

  const int bit_depth = png_get_bit_depth(r.png, r.info);
  const int color_type = png_get_color_type(r.png, r.info);
  width = static_cast<int>(png_get_image_width(r.png, r.info));
  height = static_cast<int>(png_get_image_height(r.png, r.info));

  if (bit_depth != 8) throw std::runtime_error("unsupported PNG bit depth (want 8): " + path);
  const int want_type = channels_wanted == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  if (color_type != want_type) {
    throw std::runtime_error(channels_wanted == 3 ? "non-RGB PNG content: " + path
                                                  : "non-grayscale PNG content: " + path);
  }

  bytes.resize(static_cast<std::size_t>(height) * width * channels_wanted);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * width * channels_wanted;
  }
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
}

void write_png_bytes(const std::string& path, int channels, int height, int width,
                     const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);

  PngWriter w;
  w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!w.png) throw std::runtime_error("png_create_write_struct failed");
  w.info = png_create_info_struct(w.png);
  if (!w.info) throw std::runtime_error("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(w.png))) throw std::runtime_error("failed to encode PNG: " + path);

  png_init_io(w.png, fp.get());
  png_set_IHDR(w.png, w.info, width, height, 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(w.png, w.info);

  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * width * channels);
  }
  png_write_image(w.png, rows.data());
  png_write_end(w.png, nullptr);
}

}  // namespace

RgbImage load_image(const std::string& path) {
  int h = 0, w = 0;
  std::vector<std::uint8_t> bytes;
  read_png_bytes(path, 3, h, w, bytes);
  return from_bytes(bytes, h, w);
}

void save_image(const RgbImage& image, const std::string& path) {
  write_png_bytes(path, 3, image.height, image.width, to_bytes(image));
}

Mask load_mask(const std::string& path) {
  int h = 0, w = 0;
  std::vector<std::uint8_t> bytes;
  read_png_bytes(path, 1, h, w, bytes);
  Mask m(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) m.values[i] = bytes[i] >= 128 ? 1 : 0;
  return m;
}

void save_mask(const Mask& mask, const std::string& path) {
  std::vector<std::uint8_t> bytes(mask.values.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.values[i] ? 255 : 0;
  write_png_bytes(path, 1, mask.height, mask.width, bytes);
}

void save_gray(const std::vector<double>& values, int height, int width, const std::string& path) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("save_gray: size mismatch");
  }
  std::vector<std::uint8_t> bytes(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) bytes[i] = quantize8(values[i]);
  write_png_bytes(path, 1, height, width, bytes);
}

}  // namespace traceforge
