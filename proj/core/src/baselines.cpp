#include "traceforge/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace traceforge::baselines {

using nn::Tensor;

std::string to_string(Method m) {
  switch (m) {
    case Method::fgsm: return "fgsm";
    case Method::pgd: return "pgd";
    default: return "cw";
  }
}

Method method_from_string(const std::string& s) {
  if (s == "fgsm") return Method::fgsm;
  if (s == "pgd") return Method::pgd;
  if (s == "cw") return Method::cw;
  throw std::invalid_argument("unknown attack method: " + s);
}

EndToEndAttackConfig default_endtoend_config(Method m) {
  EndToEndAttackConfig c;
  c.method = m;
  switch (m) {
    case Method::fgsm:
      c.step = 0.1;
      c.max_iter = 1;
      break;
    case Method::pgd:
      c.epsilon = 3.0;
      c.step = 1.0;
      c.max_iter = 10;
      break;
    case Method::cw:
      c.step = 1e-2;
      c.max_iter = 10;
      c.cw_binary_search_steps = 5;
      break;
  }
  return c;
}

namespace {

// gradient of -log S(x, .) against a precomputed reference embedding
Tensor<float> pair_gradient_embedded(const nets::Siamese<float>& net, const Tensor<float>& x,
                                     const Tensor<float>& fr, double* loss) {
  nn::Trace<float> trx, trh;
  const Tensor<float> fx = net.extractor.forward(x, &trx);
  const Tensor<float> comb = nets::siamese_combine(fx, fr);
  const double logit = net.head.forward(comb, &trh).v[0];
  if (loss) *loss = nn::softplus_neg(logit);
  Tensor<float> dlogit(1, 1, 1);
  dlogit.v[0] = static_cast<float>(nn::sigmoid(logit) - 1.0);  // d(-log sigmoid)/dlogit
  const Tensor<float> dcomb = net.head.backward(dlogit, trh, nullptr);
  Tensor<float> dfx, dfr;
  nets::siamese_combine_backward(dcomb, fx, fr, dfx, dfr);
  return net.extractor.backward(dfx, trx, nullptr);
}

}  // namespace

Tensor<float> pair_loss_input_gradient(const nets::Siamese<float>& net, const Tensor<float>& x,
                                       const Tensor<float>& reference, double* loss) {
  return pair_gradient_embedded(net, x, net.extractor.forward(reference), loss);
}

namespace {

void clamp01(Tensor<float>& t) {
  for (float& v : t.v) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

Tensor<float> fgsm_attack(const nets::Siamese<float>& net, const Tensor<float>& x,
                          const Tensor<float>& fr, const EndToEndAttackConfig& cfg) {
  const Tensor<float> g = pair_gradient_embedded(net, x, fr, nullptr);
  const float step = static_cast<float>(cfg.step / 255.0);
  Tensor<float> out = x;
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    out.v[i] -= step * (g.v[i] > 0.0f ? 1.0f : (g.v[i] < 0.0f ? -1.0f : 0.0f));
  }
  clamp01(out);
  return out;
}

Tensor<float> pgd_attack(const nets::Siamese<float>& net, const Tensor<float>& x,
                         const Tensor<float>& fr, const EndToEndAttackConfig& cfg) {
  const float eps = static_cast<float>(cfg.epsilon / 255.0);
  const float step = static_cast<float>(cfg.step / 255.0);
  Tensor<float> cur = x;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Tensor<float> g = pair_gradient_embedded(net, cur, fr, nullptr);
    for (std::size_t i = 0; i < cur.v.size(); ++i) {
      float v = cur.v[i] - step * (g.v[i] > 0.0f ? 1.0f : (g.v[i] < 0.0f ? -1.0f : 0.0f));
      const float lo = std::max(0.0f, x.v[i] - eps);
      const float hi = std::min(1.0f, x.v[i] + eps);
      cur.v[i] = std::clamp(v, lo, hi);
    }
    // the linf ball is an invariant, not just a final projection
    for (std::size_t i = 0; i < cur.v.size(); ++i) {
      if (std::abs(cur.v[i] - x.v[i]) > eps + 1e-6f) {
        throw std::logic_error("pgd: iterate left the epsilon ball");
      }
    }
  }
  return cur;
}

Tensor<float> cw_attack(const nets::Siamese<float>& net, const Tensor<float>& x,
                        const Tensor<float>& fr, const EndToEndAttackConfig& cfg) {
  const double lr = cfg.step / 255.0;
  double lo = 0.0, hi = -1.0;  // hi < 0 = unbounded
  double c = cfg.cw_loss_ratio;
  Tensor<float> best = x;
  double best_dist = -1.0;

  auto logit_of = [&](const Tensor<float>& v) {
    return net.head.forward(nets::siamese_combine(net.extractor.forward(v), fr)).v[0];
  };

  for (int bs = 0; bs < cfg.cw_binary_search_steps; ++bs) {
    Tensor<float> cur = x;
    nn::Adam<float> adam(cur.v.size());
    std::vector<float> grad(cur.v.size(), 0.0f);
    for (int it = 0; it < cfg.max_iter; ++it) {
      nn::Trace<float> trx, trh;
      const Tensor<float> fx = net.extractor.forward(cur, &trx);
      const Tensor<float> comb = nets::siamese_combine(fx, fr);
      const double logit = net.head.forward(comb, &trh).v[0];
      std::fill(grad.begin(), grad.end(), 0.0f);
      // distortion term
      for (std::size_t i = 0; i < cur.v.size(); ++i) grad[i] = 2.0f * (cur.v[i] - x.v[i]);
      // margin term c * max(0, -logit)
      if (logit < 0.0) {
        Tensor<float> dlogit(1, 1, 1);
        dlogit.v[0] = static_cast<float>(-c);
        const Tensor<float> dcomb = net.head.backward(dlogit, trh, nullptr);
        Tensor<float> dfx, dfr;
        nets::siamese_combine_backward(dcomb, fx, fr, dfx, dfr);
        const Tensor<float> dx = net.extractor.backward(dfx, trx, nullptr);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += dx.v[i];
      }
      adam.step(cur.v, grad, lr);
      clamp01(cur);
    }
    const bool success = logit_of(cur) > 0.0;
    if (success) {
      double dist = 0.0;
      for (std::size_t i = 0; i < cur.v.size(); ++i) {
        const double d = cur.v[i] - x.v[i];
        dist += d * d;
      }
      if (best_dist < 0.0 || dist < best_dist) {
        best_dist = dist;
        best = cur;
      }
      hi = c;
      c = 0.5 * (lo + hi);
    } else {
      if (best_dist < 0.0) best = cur;  // keep the strongest attempt so far
      lo = c;
      c = hi < 0.0 ? c * 10.0 : 0.5 * (lo + hi);
    }
  }
  return best;
}

Tensor<float> extract_block(const RgbImage& image, int r, int c, int size) {
  Tensor<float> t(size, size, 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int ch = 0; ch < 3; ++ch) t.at(y, x, ch) = static_cast<float>(image.at(r + y, c + x, ch));
    }
  }
  return t;
}

}  // namespace

Patch attack_pair(const nets::Siamese<float>& net, const Patch& patch, const Patch& reference,
                  const EndToEndAttackConfig& config) {
  if (config.method == Method::pgd && config.epsilon <= 0.0) return patch;  // empty ball
  const Tensor<float> x = nn::image_to_tensor<float>(patch.pixels);
  const Tensor<float> fr = net.embed(nn::image_to_tensor<float>(reference.pixels));
  Tensor<float> out;
  switch (config.method) {
    case Method::fgsm: out = fgsm_attack(net, x, fr, config); break;
    case Method::pgd: out = pgd_attack(net, x, fr, config); break;
    case Method::cw: out = cw_attack(net, x, fr, config); break;
  }
  Patch result = patch;
  result.pixels = nn::tensor_to_image(out);
  return result;
}

RgbImage attack_image_endtoend(const nets::Siamese<float>& net, const RgbImage& image,
                               const Patch& reference, const forensics::AnalysisBlockGrid& grid,
                               const EndToEndAttackConfig& config) {
  const Tensor<float> fr = net.embed(nn::image_to_tensor<float>(reference.pixels));
  std::vector<double> delta(image.pixels.size(), 0.0);
  std::vector<int> cover(image.pixels.size(), 0);
  for (const auto& [r, c] : grid.origins) {
    const Tensor<float> x = extract_block(image, r, c, grid.block_size);
    Tensor<float> attacked;
    switch (config.method) {
      case Method::fgsm: attacked = fgsm_attack(net, x, fr, config); break;
      case Method::pgd: attacked = pgd_attack(net, x, fr, config); break;
      case Method::cw: attacked = cw_attack(net, x, fr, config); break;
    }
    for (int y = 0; y < grid.block_size; ++y) {
      for (int xx = 0; xx < grid.block_size; ++xx) {
        for (int ch = 0; ch < 3; ++ch) {
          const std::size_t i = (static_cast<std::size_t>(r + y) * image.width + (c + xx)) * 3 + ch;
          delta[i] += static_cast<double>(attacked.at(y, xx, ch)) - x.at(y, xx, ch);
          cover[i] += 1;
        }
      }
    }
  }
  RgbImage out = image;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    if (cover[i] > 0) out.pixels[i] += delta[i] / cover[i];
  }
  out.clamp01();
  return out;
}

std::vector<float> lots_target(const nets::Siamese<float>& net, const RgbImage& image,
                               const LotsConfig& config, const Mask* gt_mask) {
  const auto& grid = config.attack_grid;
  std::vector<int> authentic_blocks;
  if (config.use_mask && gt_mask != nullptr) {
    for (std::size_t b = 0; b < grid.origins.size(); ++b) {
      const auto& [r, c] = grid.origins[b];
      bool clean = true;
      for (int y = r; y < r + grid.block_size && clean; ++y) {
        for (int x = c; x < c + grid.block_size; ++x) {
          if (gt_mask->at(y, x)) {
            clean = false;
            break;
          }
        }
      }
      if (clean) authentic_blocks.push_back(static_cast<int>(b));
    }
    if (authentic_blocks.empty()) throw std::runtime_error("lots_attack: no authentic blocks");
  } else {
    authentic_blocks.push_back(0);  // the grid's upper-left corner block
  }
  std::vector<float> target;
  for (int b : authentic_blocks) {
    const auto& [r, c] = grid.origins[b];
    const Tensor<float> f = net.embed(extract_block(image, r, c, grid.block_size));
    if (target.empty()) target.assign(f.v.size(), 0.0f);
    for (std::size_t i = 0; i < f.v.size(); ++i) target[i] += f.v[i];
  }
  for (float& v : target) v /= static_cast<float>(authentic_blocks.size());
  return target;
}

double mean_feature_distance(const nets::Siamese<float>& net, const RgbImage& image,
                             const forensics::AnalysisBlockGrid& grid,
                             const std::vector<float>& target) {
  double total = 0.0;
  for (const auto& [r, c] : grid.origins) {
    const Tensor<float> f = net.embed(extract_block(image, r, c, grid.block_size));
    double d2 = 0.0;
    for (std::size_t i = 0; i < f.v.size(); ++i) {
      const double d = f.v[i] - target[i];
      d2 += d * d;
    }
    total += d2;
  }
  return total / static_cast<double>(grid.origins.size());
}

RgbImage lots_attack(const nets::Siamese<float>& net, const RgbImage& image,
                     const LotsConfig& config, const Mask* gt_mask) {
  const auto& grid = config.attack_grid;
  const std::vector<float> target = lots_target(net, image, config, gt_mask);
  const float step = static_cast<float>(config.step / 255.0);

  std::vector<double> delta(image.pixels.size(), 0.0);
  std::vector<int> cover(image.pixels.size(), 0);
  for (const auto& [r, c] : grid.origins) {
    const Tensor<float> orig = extract_block(image, r, c, grid.block_size);
    Tensor<float> cur = orig;
    for (int it = 0; it < config.max_iter; ++it) {
      nn::Trace<float> tr;
      const Tensor<float> f = net.extractor.forward(cur, &tr);
      double d2 = 0.0;
      Tensor<float> dfeat(f.h, f.w, f.c);
      for (std::size_t i = 0; i < f.v.size(); ++i) {
        const float d = f.v[i] - target[i];
        d2 += static_cast<double>(d) * d;
        dfeat.v[i] = 2.0f * d;
      }
      if (std::sqrt(d2) < config.feature_tolerance) break;
      const Tensor<float> g = net.extractor.backward(dfeat, tr, nullptr);
      float gmax = 0.0f;
      for (float v : g.v) gmax = std::max(gmax, std::abs(v));
      if (gmax == 0.0f) break;
      for (std::size_t i = 0; i < cur.v.size(); ++i) {
        cur.v[i] = std::clamp(cur.v[i] - step * g.v[i] / gmax, 0.0f, 1.0f);
      }
    }
    for (int y = 0; y < grid.block_size; ++y) {
      for (int x = 0; x < grid.block_size; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
          const std::size_t i = (static_cast<std::size_t>(r + y) * image.width + (c + x)) * 3 + ch;
          delta[i] += static_cast<double>(cur.at(y, x, ch)) - orig.at(y, x, ch);
          cover[i] += 1;
        }
      }
    }
  }
  RgbImage out = image;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    if (cover[i] > 0) out.pixels[i] += delta[i] / cover[i];
  }
  out.clamp01();
  return out;
}

}  // namespace traceforge::baselines
