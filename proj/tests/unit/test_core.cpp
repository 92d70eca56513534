#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "testutil.hpp"
#include "traceforge/image.hpp"
#include "traceforge/rng.hpp"

using namespace traceforge;
namespace fs = std::filesystem;

TEST_CASE("extract_patches tiles the top-left region row-major") {
  Rng rng(1);
  const RgbImage img = tfu::random_image(256, 256, rng);
  const auto patches = extract_patches(img, 128);
  REQUIRE(patches.size() == 4);
  CHECK(patches[0].origin_row == 0);
  CHECK(patches[0].origin_col == 0);
  CHECK(patches[1].origin_row == 0);
  CHECK(patches[1].origin_col == 128);
  CHECK(patches[2].origin_row == 128);
  CHECK(patches[2].origin_col == 0);
  CHECK(patches[3].origin_row == 128);
  CHECK(patches[3].origin_col == 128);
  // patches copy the right pixels
  CHECK(patches[3].pixels.at(5, 7, 1) == img.at(133, 135, 1));
}

TEST_CASE("extract_patches discards trailing pixels") {
  Rng rng(2);
  const RgbImage img = tfu::random_image(300, 300, rng);
  CHECK(extract_patches(img, 128).size() == 4);
}

TEST_CASE("extract_patches identity tiling and errors") {
  Rng rng(3);
  const RgbImage img = tfu::random_image(128, 128, rng);
  const auto patches = extract_patches(img, 128);
  REQUIRE(patches.size() == 1);
  CHECK(patches[0].origin_row == 0);
  CHECK(patches[0].origin_col == 0);
  CHECK_THROWS_AS(extract_patches(tfu::random_image(100, 128, rng), 128), std::invalid_argument);
}

TEST_CASE("patch count equals floor(H/s) * floor(W/s)") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const int s = rng.uniform_int(4, 32);
    const int h = rng.uniform_int(s, 150);
    const int w = rng.uniform_int(s, 150);
    const RgbImage img = tfu::random_image(h, w, rng);
    CHECK(extract_patches(img, s).size() == static_cast<std::size_t>((h / s) * (w / s)));
  }
}

TEST_CASE("8-bit quantization rounds half up") {
  CHECK(quantize8(1.0) == 255);
  CHECK(quantize8(0.0) == 0);
  CHECK(quantize8(0.5) == 128);  // 127.5 rounds up
  CHECK(quantize8(-0.25) == 0);
  CHECK(quantize8(1.75) == 255);
}

TEST_CASE("png round trip is exact for every 8-bit value") {
  const fs::path dir = fs::temp_directory_path() / "tfg_test_core";
  fs::create_directories(dir);
  RgbImage img(16, 16);
  for (int i = 0; i < 256; ++i) {
    img.pixels[i] = i / 255.0;
    img.pixels[256 + i] = i / 255.0;
    img.pixels[512 + i] = (255 - i) / 255.0;
  }
  const std::string path = (dir / "all_values.png").string();
  save_image(img, path);
  const RgbImage back = load_image(path);
  REQUIRE(back.height == img.height);
  REQUIRE(back.width == img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    CHECK(back.pixels[i] == img.pixels[i]);
  }
  // save(load(x)) == x bit for bit
  const std::string path2 = (dir / "again.png").string();
  save_image(back, path2);
  const RgbImage twice = load_image(path2);
  CHECK(twice.pixels == back.pixels);
}

TEST_CASE("loading non-RGB content fails") {
  const fs::path dir = fs::temp_directory_path() / "tfg_test_core";
  fs::create_directories(dir);
  Mask m(8, 8);
  m.at(1, 1) = 1;
  const std::string path = (dir / "gray.png").string();
  save_mask(m, path);
  CHECK_THROWS(load_image(path));
  CHECK_THROWS(load_image((dir / "does_not_exist.png").string()));
  // and the mask path round trips
  const Mask back = load_mask(path);
  CHECK(back.at(1, 1) == 1);
  CHECK(back.count_ones() == 1);
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(RngSeed{42});
  Rng b(RngSeed{42});
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(7);
  Rng c1 = base.derive(1);
  Rng c2 = base.derive(2);
  CHECK(c1.next_u64() != c2.next_u64());
  // derive ignores consumption
  Rng base2(7);
  base2.next_u64();
  CHECK(base2.derive(1).next_u64() == base.derive(1).next_u64());
}

TEST_CASE("rng distributions stay in range") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(2.0, 3.0);
    CHECK(u >= 2.0);
    CHECK(u < 3.0);
    const int k = rng.uniform_int(-2, 4);
    CHECK(k >= -2);
    CHECK(k <= 4);
  }
  double mean = 0.0;
  for (int i = 0; i < 20000; ++i) mean += rng.normal();
  CHECK(std::abs(mean / 20000.0) < 0.05);
}
