#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "traceforge/baselines.hpp"

using namespace traceforge;
using namespace traceforge::baselines;

namespace {

Patch random_patch(Rng& rng, int size = kPatchSize) {
  Patch p;
  p.pixels = tfu::random_image(size, size, rng);
  return p;
}

double pair_loss(const nets::Siamese<float>& s, const Patch& a, const Patch& b) {
  return -std::log(std::max(nets::similarity(s, a, b), 1e-300));
}

}  // namespace

TEST_CASE("pgd with epsilon zero returns the input") {
  Rng rng(1);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(2));
  const Patch x = random_patch(rng);
  const Patch ref = random_patch(rng);
  EndToEndAttackConfig cfg = default_endtoend_config(Method::pgd);
  cfg.epsilon = 0.0;
  const Patch out = attack_pair(s, x, ref, cfg);
  CHECK(out.pixels.pixels == x.pixels.pixels);
}

TEST_CASE("pgd never leaves the linf ball or the unit range") {
  Rng rng(3);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(4));
  const EndToEndAttackConfig cfg = default_endtoend_config(Method::pgd);
  for (int rep = 0; rep < 3; ++rep) {
    const Patch x = random_patch(rng);
    const Patch ref = random_patch(rng);
    const Patch out = attack_pair(s, x, ref, cfg);
    for (std::size_t i = 0; i < out.pixels.pixels.size(); ++i) {
      CHECK(std::abs(out.pixels.pixels[i] - x.pixels.pixels[i]) <= 3.0 / 255.0 + 1e-6);
      CHECK(out.pixels.pixels[i] >= 0.0);
      CHECK(out.pixels.pixels[i] <= 1.0);
    }
  }
}

TEST_CASE("fgsm is exactly one signed gradient step") {
  Rng rng(5);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(6));
  const Patch x = random_patch(rng);
  const Patch ref = random_patch(rng);
  const EndToEndAttackConfig cfg = default_endtoend_config(Method::fgsm);
  const Patch got = attack_pair(s, x, ref, cfg);

  const auto g = pair_loss_input_gradient(s, nn::image_to_tensor<float>(x.pixels),
                                          nn::image_to_tensor<float>(ref.pixels));
  const double step = 0.1 / 255.0;
  for (std::size_t i = 0; i < x.pixels.pixels.size(); ++i) {
    const double sign = g.v[i] > 0 ? 1.0 : (g.v[i] < 0 ? -1.0 : 0.0);
    const double want =
        std::clamp(static_cast<double>(static_cast<float>(x.pixels.pixels[i]) -
                                       static_cast<float>(step * sign)),
                   0.0, 1.0);
    CHECK(got.pixels.pixels[i] == doctest::Approx(want).epsilon(1e-7));
  }
}

TEST_CASE("all methods reduce the pair loss on most attempts") {
  Rng rng(7);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(8));
  for (const Method m : {Method::fgsm, Method::pgd, Method::cw}) {
    int improved = 0;
    const int trials = 10;
    for (int t = 0; t < trials; ++t) {
      const Patch x = random_patch(rng);
      const Patch ref = random_patch(rng);
      const Patch out = attack_pair(s, x, ref, default_endtoend_config(m));
      if (pair_loss(s, out, ref) <= pair_loss(s, x, ref) + 1e-12) ++improved;
    }
    INFO("method ", to_string(m));
    CHECK(improved >= (m == Method::fgsm ? 7 : 9));
  }
}

TEST_CASE("single-block grid reduces to attack_pair at the block") {
  Rng rng(9);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(10));
  // 8-bit aligned pixels, the representation every pipeline image has
  const RgbImage img =
      from_bytes(to_bytes(tfu::random_image(kPatchSize, kPatchSize, rng)), kPatchSize, kPatchSize);
  const auto grid = forensics::AnalysisBlockGrid::build(kPatchSize, kPatchSize, kPatchSize, 1);
  REQUIRE(grid.origins.size() == 1);
  Patch ref = random_patch(rng);
  const EndToEndAttackConfig cfg = default_endtoend_config(Method::pgd);
  const RgbImage whole = attack_image_endtoend(s, img, ref, grid, cfg);
  Patch block;
  block.pixels = img;
  const Patch attacked = attack_pair(s, block, ref, cfg);
  for (std::size_t i = 0; i < whole.pixels.size(); ++i) {
    CHECK(whole.pixels[i] == doctest::Approx(attacked.pixels.pixels[i]).epsilon(1e-6));
  }
}

TEST_CASE("lots: mask-free target is the corner block, empty mask means global mean") {
  Rng rng(11);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(12));
  const RgbImage img = tfu::random_image(160, 192, rng);
  LotsConfig cfg;
  cfg.attack_grid = forensics::AnalysisBlockGrid::build(160, 192, kPatchSize, 2);

  // no mask available: the upper-left corner block is the target
  cfg.use_mask = false;
  const auto corner = lots_target(s, img, cfg, nullptr);
  const auto blocks = forensics::sample_grid(img, cfg.attack_grid);
  const auto f0 = s.embed(nn::image_to_tensor<float>(blocks[0].pixels));
  REQUIRE(corner.size() == f0.v.size());
  for (std::size_t i = 0; i < corner.size(); ++i) {
    CHECK(corner[i] == doctest::Approx(f0.v[i]).epsilon(1e-6));
  }

  // empty mask: every block is authentic, target is the global mean embedding
  cfg.use_mask = true;
  Mask empty(160, 192);
  const auto global = lots_target(s, img, cfg, &empty);
  std::vector<double> want(corner.size(), 0.0);
  for (const auto& b : blocks) {
    const auto f = s.embed(nn::image_to_tensor<float>(b.pixels));
    for (std::size_t i = 0; i < want.size(); ++i) want[i] += f.v[i];
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(global[i] == doctest::Approx(want[i] / blocks.size()).epsilon(1e-5));
  }

  // a mask covering everything leaves no authentic block
  Mask full(160, 192);
  for (auto& v : full.values) v = 1;
  CHECK_THROWS_AS(lots_attack(s, img, cfg, &full), std::runtime_error);
}

TEST_CASE("lots reduces the mean feature distance to its target") {
  Rng rng(13);
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(14));
  const RgbImage img = tfu::random_image(160, 192, rng);
  // corner mask that leaves the right-hand blocks fully authentic
  Mask mask(160, 192);
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) mask.at(y, x) = 1;
  }
  LotsConfig cfg;
  cfg.attack_grid = forensics::AnalysisBlockGrid::build(160, 192, kPatchSize, 2);
  cfg.max_iter = 25;
  const auto target = lots_target(s, img, cfg, &mask);
  const double before = mean_feature_distance(s, img, cfg.attack_grid, target);
  const RgbImage attacked = lots_attack(s, img, cfg, &mask);
  const double after = mean_feature_distance(s, attacked, cfg.attack_grid, target);
  CHECK(after < before);
  for (double v : attacked.pixels) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("method names round trip") {
  for (const Method m : {Method::fgsm, Method::pgd, Method::cw}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("nope"), std::invalid_argument);
}
