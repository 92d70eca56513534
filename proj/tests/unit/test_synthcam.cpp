#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <set>

#include "testutil.hpp"
#include "traceforge/metrics.hpp"
#include "traceforge/synthcam.hpp"

using namespace traceforge;
using namespace traceforge::synthcam;
namespace fs = std::filesystem;

TEST_CASE("identity pipeline returns the input untouched") {
  CameraProfile p;  // identity kernel, gamma 1, no noise, no jpeg
  Rng rng(1);
  const RgbImage img = tfu::random_image(64, 64, rng);
  const RgbImage out = apply_camera(img, p, RngSeed{5});
  REQUIRE(out.pixels.size() == img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    CHECK(out.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
  }
}

TEST_CASE("apply_camera is deterministic per seed") {
  CameraProfile p;
  p.noise_std = 0.02;
  Rng rng(2);
  const RgbImage img = tfu::random_image(48, 48, rng);
  const RgbImage a = apply_camera(img, p, RngSeed{7});
  const RgbImage b = apply_camera(img, p, RngSeed{7});
  CHECK(a.pixels == b.pixels);
  const RgbImage c = apply_camera(img, p, RngSeed{8});
  CHECK(a.pixels != c.pixels);
}

TEST_CASE("profile validation rejects bad fields") {
  CameraProfile p;
  p.demosaic_kernel[0] = 0.5;  // breaks unit DC gain
  CHECK_THROWS_AS(validate_profile(p), std::invalid_argument);
  CameraProfile q;
  q.jpeg_quality = 30;
  CHECK_THROWS_AS(validate_profile(q), std::invalid_argument);
  CameraProfile r;
  r.gamma = 0.0;
  CHECK_THROWS_AS(validate_profile(r), std::invalid_argument);
  CameraProfile ok;
  ok.jpeg_quality = 75;
  validate_profile(ok);
}

TEST_CASE("jpeg requantization distorts more at lower quality") {
  Rng rng(3);
  const RgbImage img = tfu::random_image(64, 64, rng, 0.2, 0.8);
  const RgbImage q95 = jpeg_roundtrip(img, 95);
  const RgbImage q60 = jpeg_roundtrip(img, 60);
  CHECK(metrics::psnr(img, q95) > metrics::psnr(img, q60));
  CHECK(metrics::psnr(img, q95) > 30.0);
  // recompressing at the same quality is near idempotent
  const RgbImage q60b = jpeg_roundtrip(q60, 60);
  CHECK(metrics::psnr(q60, q60b) > metrics::psnr(img, q60));
}

TEST_CASE("default profiles are distinct and quality pairs share hardware") {
  const auto seen = default_seen_profiles();
  const auto unseen = default_unseen_profiles();
  REQUIRE(seen.size() == 6);
  REQUIRE(unseen.size() == 2);
  Dataset ds;
  ds.profiles_seen = seen;
  ds.profiles_unseen = unseen;
  // ids 1 and 4 share hardware at different jpeg qualities, as do 3 and 5
  CHECK(ds.hardware_group(1) == ds.hardware_group(4));
  CHECK(ds.hardware_group(3) == ds.hardware_group(5));
  CHECK(ds.hardware_group(0) != ds.hardware_group(1));
  CHECK(ds.hardware_group(2) != ds.hardware_group(3));
  CHECK(ds.hardware_group(6) != ds.hardware_group(7));
  for (std::size_t i = 0; i < seen.size(); ++i) {
    for (std::size_t j = i + 1; j < seen.size(); ++j) {
      const bool identical = same_hardware(seen[i], seen[j]) &&
                             seen[i].jpeg_quality == seen[j].jpeg_quality;
      CHECK(!identical);
    }
  }
}

TEST_CASE("build_splits honors counts, roles and image exclusivity") {
  Rng rng(4);
  std::vector<RgbImage> base;
  for (int i = 0; i < 40; ++i) base.push_back(make_base_image(128, 256, rng));

  std::vector<CameraProfile> seen(2), unseen(1);
  seen[0].id = 0;
  seen[1].id = 1;
  seen[1].noise_std = 0.02;
  unseen[0].id = 9;
  unseen[0].gamma = 1.2;

  SplitCounts counts{10, 4, 6};
  const Dataset ds = build_splits(base, seen, unseen, counts, RngSeed{11});

  const auto* train = ds.find(SplitGroup::seen, SplitRole::train);
  const auto* val = ds.find(SplitGroup::seen, SplitRole::val);
  const auto* test = ds.find(SplitGroup::seen, SplitRole::test);
  const auto* utest = ds.find(SplitGroup::unseen, SplitRole::test);
  REQUIRE(train != nullptr);
  REQUIRE(val != nullptr);
  REQUIRE(test != nullptr);
  REQUIRE(utest != nullptr);
  CHECK(train->patches.size() == 20);
  CHECK(val->patches.size() == 8);
  CHECK(test->patches.size() == 12);
  CHECK(utest->patches.size() == 6);
  CHECK(ds.find(SplitGroup::unseen, SplitRole::train) == nullptr);

  // no base image contributes to two roles
  std::set<int> train_imgs, val_imgs, test_imgs;
  for (const auto& r : train->patches) train_imgs.insert(r.image_id);
  for (const auto& r : val->patches) val_imgs.insert(r.image_id);
  for (const auto& r : test->patches) test_imgs.insert(r.image_id);
  for (int id : val_imgs) CHECK(train_imgs.count(id) == 0);
  for (int id : test_imgs) {
    CHECK(train_imgs.count(id) == 0);
    CHECK(val_imgs.count(id) == 0);
  }

  // unseen profiles never appear outside the unseen test split
  for (const auto& r : train->patches) CHECK(r.camera_id != 9);
  for (const auto& r : val->patches) CHECK(r.camera_id != 9);
  for (const auto& r : test->patches) CHECK(r.camera_id != 9);

  // determinism: identical seed, identical manifests
  const Dataset ds2 = build_splits(base, seen, unseen, counts, RngSeed{11});
  REQUIRE(ds2.splits.size() == ds.splits.size());
  for (std::size_t s = 0; s < ds.splits.size(); ++s) {
    REQUIRE(ds2.splits[s].patches.size() == ds.splits[s].patches.size());
    for (std::size_t i = 0; i < ds.splits[s].patches.size(); ++i) {
      CHECK(ds2.splits[s].patches[i].pixels8 == ds.splits[s].patches[i].pixels8);
      CHECK(ds2.splits[s].patches[i].camera_id == ds.splits[s].patches[i].camera_id);
    }
  }
}

TEST_CASE("build_splits reports the shortfall") {
  Rng rng(5);
  std::vector<RgbImage> base;
  for (int i = 0; i < 2; ++i) base.push_back(make_base_image(128, 128, rng));
  std::vector<CameraProfile> seen(1);
  try {
    build_splits(base, seen, {}, SplitCounts{100, 10, 10}, RngSeed{1});
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("insufficient") != std::string::npos);
    CHECK(msg.find("profile 0") != std::string::npos);
  }
}

TEST_CASE("make_splice composites donor traces inside the mask") {
  Rng rng(6);
  const RgbImage host = make_base_image(96, 96, rng);
  const RgbImage donor = make_base_image(96, 96, rng);
  CameraProfile hp;
  CameraProfile dp;
  dp.id = 1;
  dp.gamma = 0.7;

  Mask empty(96, 96);
  const SpliceSample pure_host = make_splice(host, donor, empty, hp, dp, RngSeed{3});
  const RgbImage host_dev = apply_camera(host, hp, RngSeed{Rng(3).derive(1).seed()});
  CHECK(pure_host.image.pixels == host_dev.pixels);
  CHECK(pure_host.mask.count_ones() == 0);

  Mask full(96, 96);
  for (auto& v : full.values) v = 1;
  const SpliceSample pure_donor = make_splice(host, donor, full, hp, dp, RngSeed{3});
  const RgbImage donor_dev = apply_camera(donor, dp, RngSeed{Rng(3).derive(2).seed()});
  CHECK(pure_donor.image.pixels == donor_dev.pixels);

  Mask half(96, 96);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 96; ++x) half.at(y, x) = 1;
  }
  const SpliceSample s = make_splice(host, donor, half, hp, dp, RngSeed{3});
  CHECK(s.image.at(10, 10, 0) == donor_dev.at(10, 10, 0));
  CHECK(s.image.at(80, 10, 0) == host_dev.at(80, 10, 0));
  CHECK(s.host_profile_id == hp.id);
  CHECK(s.donor_profile_id == dp.id);

  Mask wrong(50, 96);
  CHECK_THROWS_AS(make_splice(host, donor, wrong, hp, dp, RngSeed{3}), std::invalid_argument);
}

TEST_CASE("random masks cover the requested fraction range") {
  Rng rng(7);
  for (int i = 0; i < 30; ++i) {
    const Mask m = random_mask(120, 160, rng, 0.10, 0.40);
    const double frac = static_cast<double>(m.count_ones()) / (120.0 * 160.0);
    CHECK(frac > 0.04);  // ellipse inscribed in its bounding box loses area
    CHECK(frac < 0.45);
    for (auto v : m.values) CHECK((v == 0 || v == 1));
  }
}

TEST_CASE("benchmark splices always cross hardware pipelines") {
  BenchmarkConfig cfg;
  cfg.n_spliced = 6;
  cfg.n_authentic = 4;
  cfg.image_height = 128;
  cfg.image_width = 160;
  const auto profiles = default_seen_profiles();
  const SpliceBenchmark bench = make_benchmark(profiles, cfg, RngSeed{9});
  REQUIRE(bench.spliced.size() == 6);
  REQUIRE(bench.authentic.size() == 4);
  Dataset ds;
  ds.profiles_seen = profiles;
  for (const auto& s : bench.spliced) {
    CHECK(ds.hardware_group(s.host_profile_id) != ds.hardware_group(s.donor_profile_id));
    CHECK(s.mask.count_ones() > 0);
    CHECK(s.image.height == 128);
    CHECK(s.image.width == 160);
  }
}

TEST_CASE("dataset and benchmark survive a disk round trip") {
  const fs::path dir = fs::temp_directory_path() / "tfg_test_synthcam";
  fs::remove_all(dir);
  const synthcam::Dataset ds = tfu::tiny_dataset(6, 2, 2);
  save_dataset(ds, (dir / "dataset").string());
  const synthcam::Dataset back = load_dataset((dir / "dataset").string());
  REQUIRE(back.splits.size() == ds.splits.size());
  CHECK(back.profiles_seen.size() == ds.profiles_seen.size());
  for (std::size_t s = 0; s < ds.splits.size(); ++s) {
    REQUIRE(back.splits[s].patches.size() == ds.splits[s].patches.size());
    for (std::size_t i = 0; i < ds.splits[s].patches.size(); ++i) {
      CHECK(back.splits[s].patches[i].pixels8 == ds.splits[s].patches[i].pixels8);
    }
  }

  BenchmarkConfig bcfg;
  bcfg.n_spliced = 2;
  bcfg.n_authentic = 2;
  bcfg.image_height = 128;
  bcfg.image_width = 128;
  const SpliceBenchmark bench = make_benchmark(default_seen_profiles(), bcfg, RngSeed{10});
  save_benchmark(bench, (dir / "bench").string());
  const SpliceBenchmark bback = load_benchmark((dir / "bench").string());
  REQUIRE(bback.spliced.size() == bench.spliced.size());
  REQUIRE(bback.authentic.size() == bench.authentic.size());
  CHECK(to_bytes(bback.spliced[0].image) == to_bytes(bench.spliced[0].image));
  CHECK(bback.spliced[0].mask.values == bench.spliced[0].mask.values);
}
