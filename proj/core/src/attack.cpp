#include "traceforge/attack.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace traceforge::attack {

using nn::Tensor;
using synthcam::PatchRecord;

double phase1_total(double p_target, double l1, double alpha, double log_epsilon) {
  return alpha * -std::log(std::max(p_target, log_epsilon)) + l1;
}

double phase2_similarity_term(const std::vector<double>& betas, const std::vector<double>& scores,
                              double log_epsilon) {
  if (betas.size() != scores.size()) throw std::invalid_argument("betas/scores size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    total += betas[i] * -std::log(std::clamp(scores[i], log_epsilon, 1.0));
  }
  return total;
}

namespace {

double lr_at(double base, int epoch, int halve_every) {
  return base * std::pow(0.5, halve_every > 0 ? epoch / halve_every : 0);
}

double patch_psnr(const Tensor<float>& a, const Tensor<float>& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.v.size());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

AttackTrainReport train_phase1(nets::Generator<float>& gen, const nets::Classifier<float>& cls,
                               const synthcam::Dataset& data, const Phase1Config& config) {
  const synthcam::DatasetSplit* train = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::train);
  const synthcam::DatasetSplit* val = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::val);
  if (!train || train->patches.empty()) throw std::invalid_argument("train split missing or empty");

  Rng rng(config.seed);
  int target_id = config.target_camera;
  if (config.randomize_target) {
    target_id = cls.class_labels[rng.index(cls.class_labels.size())];
  }
  const int target_class = cls.class_of_label(target_id);
  if (target_class < 0) {
    throw std::invalid_argument("phase 1 target camera " + std::to_string(target_id) +
                                " is not a seen label");
  }

  // fixed validation subset
  std::vector<const PatchRecord*> val_set;
  {
    const auto& source = (val && !val->patches.empty()) ? val->patches : train->patches;
    Rng vrng = rng.derive(0x111);
    std::vector<int> idx(source.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    vrng.shuffle(idx);
    const int n = std::min<int>(config.val_patches, static_cast<int>(idx.size()));
    for (int i = 0; i < n; ++i) val_set.push_back(&source[idx[i]]);
  }

  auto validate = [&](double& frac, double& mpsnr) {
    std::size_t hits = 0;
    double psnr_sum = 0.0;
    for (const PatchRecord* rec : val_set) {
      const Tensor<float> x = synthcam::record_tensor<float>(*rec);
      const Tensor<float> y = gen.forward(x);
      const std::vector<double> p = nets::classify(cls, y);
      const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      if (pred == target_class) ++hits;
      psnr_sum += patch_psnr(x, y);
    }
    frac = val_set.empty() ? 0.0 : static_cast<double>(hits) / val_set.size();
    mpsnr = val_set.empty() ? 0.0 : psnr_sum / val_set.size();
  };

  nn::Adam<float> adam(gen.net.param_count());
  std::vector<float> grads(gen.net.param_count(), 0.0f);
  std::vector<int> order(train->patches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  AttackTrainReport report;
  std::vector<float> best_params = gen.net.params();
  double best_frac = -1.0;
  double best_psnr_fallback = -1.0;
  bool have_qualified = false;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config.lr, epoch, config.lr_halve_every);
    Rng erng = rng.derive(200 + epoch);
    erng.shuffle(order);
    const int full_steps = static_cast<int>((order.size() + config.batch - 1) / config.batch);
    const int steps = config.steps_per_epoch > 0 ? std::min(config.steps_per_epoch, full_steps)
                                                 : full_steps;
    double sum_total = 0.0, sum_lc = 0.0, sum_lp = 0.0;
    std::size_t n_loss = 0;
    for (int step = 0; step < steps; ++step) {
      const std::size_t begin = static_cast<std::size_t>(step) * config.batch;
      if (begin >= order.size()) break;
      const std::size_t end = std::min(order.size(), begin + config.batch);
      std::fill(grads.begin(), grads.end(), 0.0f);
      for (std::size_t i = begin; i < end; ++i) {
        const Tensor<float> x = synthcam::record_tensor<float>(train->patches[order[i]]);
        const Phase1Loss l = phase1_loss(gen, cls, x, target_class, config.alpha,
                                         config.log_epsilon, &grads,
                                         1.0 / static_cast<double>(end - begin));
        sum_total += l.total;
        sum_lc += l.classification;
        sum_lp += l.perceptual;
        ++n_loss;
      }
      adam.step(gen.net.params(), grads, lr);
    }

    double frac = 0.0, mpsnr = 0.0;
    validate(frac, mpsnr);
    AttackEpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.loss = n_loss ? sum_total / n_loss : 0.0;
    log.loss_classification = n_loss ? sum_lc / n_loss : 0.0;
    log.loss_perceptual = n_loss ? sum_lp / n_loss : 0.0;
    log.val_metric = frac;
    log.val_psnr = mpsnr;
    report.epochs.push_back(log);
    if (config.verbose) {
      std::cerr << "phase1 epoch " << epoch << " loss " << log.loss << " val_target " << frac
                << " val_psnr " << mpsnr << "\n";
    }

    // best validation target fraction subject to the quality gate; if no
    // epoch meets the gate, fall back to the highest-psnr epoch
    const bool qualified = mpsnr >= config.min_psnr;
    if (qualified && (!have_qualified || frac > best_frac)) {
      have_qualified = true;
      best_frac = frac;
      report.best_epoch = epoch;
      best_params = gen.net.params();
    } else if (!have_qualified && mpsnr > best_psnr_fallback) {
      best_psnr_fallback = mpsnr;
      report.best_epoch = epoch;
      best_params = gen.net.params();
    }
  }

  gen.net.params() = best_params;
  report.best_metric = best_frac >= 0.0 ? best_frac : 0.0;
  return report;
}

AttackTrainReport train_phase2(nets::Generator<float>& gen,
                               const std::vector<std::pair<const nets::Siamese<float>*, double>>& siamese,
                               const synthcam::Dataset& data, const Phase2Config& config) {
  if (siamese.empty()) throw std::invalid_argument("train_phase2: empty siamese list");
  const synthcam::DatasetSplit* train = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::train);
  const synthcam::DatasetSplit* val = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::val);
  if (!train || train->patches.empty()) throw std::invalid_argument("train split missing or empty");

  Rng rng(config.seed);

  // fixed different-hardware validation pairs over a bounded patch pool
  const auto& vrecs = (val && !val->patches.empty()) ? val->patches : train->patches;
  std::vector<int> vpool;
  std::vector<std::pair<int, int>> vpairs;
  {
    Rng vrng = rng.derive(0x222);
    std::vector<int> idx(vrecs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    vrng.shuffle(idx);
    const int pool_n = std::min<int>(std::max(8, config.val_pool_patches), static_cast<int>(idx.size()));
    vpool.assign(idx.begin(), idx.begin() + pool_n);
    int guard = 0;
    while (static_cast<int>(vpairs.size()) < config.val_pairs && guard < config.val_pairs * 50) {
      ++guard;
      const int a = vpool[vrng.index(vpool.size())];
      const int b = vpool[vrng.index(vpool.size())];
      if (data.hardware_group(vrecs[a].camera_id) == data.hardware_group(vrecs[b].camera_id)) continue;
      vpairs.emplace_back(a, b);
    }
    if (vpairs.empty()) throw std::invalid_argument("train_phase2: no different-source validation pairs");
  }

  auto validate = [&](double& sar, double& mpsnr) {
    // attack every pool patch once, then score the fixed pairs
    std::vector<Tensor<float>> attacked(vpool.size());
    std::vector<std::vector<Tensor<float>>> embeds(siamese.size());
    double psnr_sum = 0.0;
    for (std::size_t i = 0; i < vpool.size(); ++i) {
      const Tensor<float> x = synthcam::record_tensor<float>(vrecs[vpool[i]]);
      attacked[i] = gen.forward(x);
      psnr_sum += patch_psnr(x, attacked[i]);
    }
    for (std::size_t s = 0; s < siamese.size(); ++s) {
      embeds[s].resize(vpool.size());
      for (std::size_t i = 0; i < vpool.size(); ++i) {
        embeds[s][i] = siamese[s].first->extractor.forward(attacked[i]);
      }
    }
    auto pool_index = [&](int rec_idx) {
      return static_cast<std::size_t>(
          std::find(vpool.begin(), vpool.end(), rec_idx) - vpool.begin());
    };
    double sar_sum = 0.0;
    for (std::size_t s = 0; s < siamese.size(); ++s) {
      std::size_t fooled = 0;
      for (const auto& [a, b] : vpairs) {
        const double score = siamese[s].first->similarity_from_embeddings(
            embeds[s][pool_index(a)], embeds[s][pool_index(b)]);
        if (score > 0.5) ++fooled;
      }
      sar_sum += static_cast<double>(fooled) / vpairs.size();
    }
    sar = sar_sum / siamese.size();
    mpsnr = vpool.empty() ? 0.0 : psnr_sum / vpool.size();
  };

  nn::Adam<float> adam(gen.net.param_count());
  std::vector<float> grads(gen.net.param_count(), 0.0f);

  AttackTrainReport report;
  std::vector<float> best_params = gen.net.params();
  double best_sar = -1.0;

  const int default_steps =
      static_cast<int>((train->patches.size() + config.pool_size - 1) / config.pool_size);
  const int steps_per_epoch = config.steps_per_epoch > 0 ? config.steps_per_epoch : default_steps;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = lr_at(config.lr, epoch, config.lr_halve_every);
    Rng erng = rng.derive(300 + epoch);
    double sum_total = 0.0, sum_ls = 0.0, sum_lp = 0.0;
    std::vector<double> sum_per(siamese.size(), 0.0);
    std::size_t n_loss = 0;

    for (int step = 0; step < steps_per_epoch; ++step) {
      // sample a patch pool, then draw the pair batch from it with replacement
      std::vector<int> pool(config.pool_size);
      for (int i = 0; i < config.pool_size; ++i) {
        pool[i] = static_cast<int>(erng.index(train->patches.size()));
      }
      std::vector<std::pair<int, int>> pairs(config.pairs_per_batch);
      for (auto& pr : pairs) {
        pr.first = pool[erng.index(pool.size())];
        pr.second = pool[erng.index(pool.size())];
      }

      // forward each distinct patch once, accumulate pair gradients on the
      // generator outputs, then run one generator backward per patch
      std::vector<int> distinct;
      for (const auto& [a, b] : pairs) {
        if (std::find(distinct.begin(), distinct.end(), a) == distinct.end()) distinct.push_back(a);
        if (std::find(distinct.begin(), distinct.end(), b) == distinct.end()) distinct.push_back(b);
      }
      std::vector<nn::Trace<float>> traces(distinct.size());
      std::vector<Tensor<float>> inputs(distinct.size());
      std::vector<Tensor<float>> outputs(distinct.size());
      std::vector<Tensor<float>> douts(distinct.size());
      for (std::size_t i = 0; i < distinct.size(); ++i) {
        inputs[i] = synthcam::record_tensor<float>(train->patches[distinct[i]]);
        outputs[i] = gen.forward(inputs[i], &traces[i]);
        douts[i] = Tensor<float>(outputs[i].h, outputs[i].w, outputs[i].c);
      }
      auto slot = [&](int rec) {
        return static_cast<std::size_t>(std::find(distinct.begin(), distinct.end(), rec) -
                                        distinct.begin());
      };

      const double w = 1.0 / config.pairs_per_batch;
      const double cap = -std::log(config.log_epsilon);
      const std::size_t npix = inputs[0].v.size();
      for (const auto& [ra, rb] : pairs) {
        const std::size_t ia = slot(ra), ib = slot(rb);
        double pair_sim = 0.0;
        for (std::size_t s = 0; s < siamese.size(); ++s) {
          const auto& [net, beta] = siamese[s];
          nn::Trace<float> trf1, trf2, trh;
          const Tensor<float> f1 = net->extractor.forward(outputs[ia], &trf1);
          const Tensor<float> f2 = net->extractor.forward(outputs[ib], &trf2);
          const Tensor<float> comb = nets::siamese_combine(f1, f2);
          const double logit = net->head.forward(comb, &trh).v[0];
          double term = nn::softplus_neg(logit);
          if (term > cap) term = cap;
          sum_per[s] += term;
          pair_sim += beta * term;

          nn::Tensor<float> dlogit(1, 1, 1);
          dlogit.v[0] = static_cast<float>(beta * w * (nn::sigmoid(logit) - 1.0));
          const Tensor<float> dcomb = net->head.backward(dlogit, trh, nullptr);
          Tensor<float> df1, df2;
          nets::siamese_combine_backward(dcomb, f1, f2, df1, df2);
          const Tensor<float> dy1 = net->extractor.backward(df1, trf1, nullptr);
          const Tensor<float> dy2 = net->extractor.backward(df2, trf2, nullptr);
          for (std::size_t i = 0; i < npix; ++i) {
            douts[ia].v[i] += dy1.v[i];
            douts[ib].v[i] += dy2.v[i];
          }
        }
        double mse = 0.0;
        for (std::size_t i = 0; i < npix; ++i) {
          const double d1 = static_cast<double>(inputs[ia].v[i]) - outputs[ia].v[i];
          const double d2 = static_cast<double>(inputs[ib].v[i]) - outputs[ib].v[i];
          mse += 0.5 * (d1 * d1 + d2 * d2);
        }
        mse /= static_cast<double>(npix);
        const float pscale = static_cast<float>(0.5 * w / static_cast<double>(npix));
        for (std::size_t i = 0; i < npix; ++i) {
          douts[ia].v[i] += 2.0f * pscale * (outputs[ia].v[i] - inputs[ia].v[i]);
          douts[ib].v[i] += 2.0f * pscale * (outputs[ib].v[i] - inputs[ib].v[i]);
        }
        sum_ls += pair_sim;
        sum_lp += mse;
        sum_total += pair_sim + mse;
        ++n_loss;
      }

      std::fill(grads.begin(), grads.end(), 0.0f);
      for (std::size_t i = 0; i < distinct.size(); ++i) {
        gen.net.backward(douts[i], traces[i], &grads);
      }
      adam.step(gen.net.params(), grads, lr);
    }

    double sar = 0.0, mpsnr = 0.0;
    validate(sar, mpsnr);
    AttackEpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.loss = n_loss ? sum_total / n_loss : 0.0;
    log.loss_perceptual = n_loss ? sum_lp / n_loss : 0.0;
    for (double v : sum_per) log.loss_per_network.push_back(n_loss ? v / n_loss : 0.0);
    log.val_metric = sar;
    log.val_psnr = mpsnr;
    report.epochs.push_back(log);
    if (config.verbose) {
      std::cerr << "phase2 epoch " << epoch << " loss " << log.loss << " val_sar " << sar
                << " val_psnr " << mpsnr << "\n";
    }

    if (sar > best_sar) {
      best_sar = sar;
      report.best_epoch = epoch;
      best_params = gen.net.params();
    } else if (sar < best_sar) {
      // validation SAR started decreasing
      report.stopped_early = true;
      break;
    }
  }

  gen.net.params() = best_params;
  report.best_metric = best_sar;
  return report;
}

namespace {

// tile edges along one axis; a trailing sliver shorter than 3 px is merged
// into the previous tile so every piece is a valid generator input
std::vector<std::pair<int, int>> tile_segments(int length, int tile) {
  std::vector<std::pair<int, int>> seg;
  for (int start = 0; start < length; start += tile) {
    seg.emplace_back(start, std::min(tile, length - start));
  }
  if (seg.size() >= 2 && seg.back().second < 3) {
    seg[seg.size() - 2].second += seg.back().second;
    seg.pop_back();
  }
  return seg;
}

}  // namespace

RgbImage deploy(const nets::Generator<float>& gen, const RgbImage& image,
                std::optional<int> tile_size) {
  if (!tile_size.has_value()) {
    return gen.apply(image);
  }
  const int tile = *tile_size;
  if (tile < 3) throw std::invalid_argument("deploy: tile_size must be >= 3");
  RgbImage out(image.height, image.width);
  for (const auto& [y0, th] : tile_segments(image.height, tile)) {
    for (const auto& [x0, tw] : tile_segments(image.width, tile)) {
      RgbImage block(th, tw);
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
          for (int c = 0; c < 3; ++c) block.at(y, x, c) = image.at(y0 + y, x0 + x, c);
        }
      }
      const RgbImage attacked = gen.apply(block);
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
          for (int c = 0; c < 3; ++c) out.at(y0 + y, x0 + x, c) = attacked.at(y, x, c);
        }
      }
    }
  }
  return out;
}

RgbImage generate_region(const nets::Generator<float>& gen, const RgbImage& image, const Mask& mask) {
  if (image.height != mask.height || image.width != mask.width) {
    throw std::invalid_argument("generate_region: image/mask shape mismatch");
  }
  if (mask.count_ones() == 0) return image;
  const RgbImage attacked = gen.apply(image);
  RgbImage out = image;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(y, x)) {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = attacked.at(y, x, c);
      }
    }
  }
  return out;
}

}  // namespace traceforge::attack
