#include "traceforge/models.hpp"

#include <algorithm>
#include <iostream>

namespace traceforge::nets {

using nn::Act;
using nn::Tensor;

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

std::size_t generator_param_count(const GeneratorArch& a) {
  const std::size_t c = static_cast<std::size_t>(a.channels);
  const std::size_t input_conv = 9 * 3 * c + c;
  const std::size_t block = 2 * (9 * c * c + c);
  const std::size_t reduction = 9 * c * 3 + 3;
  return input_conv + static_cast<std::size_t>(a.blocks) * block + reduction;
}

template <typename T>
Generator<T> build_generator(Rng rng, GeneratorInit init, GeneratorArch arch) {
  Generator<T> g;
  g.arch = arch;
  g.net.add(std::make_unique<nn::Conv<T>>(3, 3, arch.channels, Act::relu));
  for (int b = 0; b < arch.blocks; ++b) {
    g.net.add(std::make_unique<nn::Residual<T>>(arch.channels));
  }
  g.net.add(std::make_unique<nn::Conv<T>>(3, arch.channels, 3, Act::none));
  g.net.add(std::make_unique<nn::Clamp01<T>>());
  g.net.finalize({kPatchSize, kPatchSize, 3}, rng);

  if (init == GeneratorInit::near_identity) {
    // Route each color through a dedicated feature channel with delta kernels
    // so the untrained network computes the identity; the residual branches
    // already start at zero. Training then only learns the trace delta.
    std::vector<T>& p = g.net.params();
    const int c = arch.channels;
    {
      // input conv: weights [(ky*3+kx)*3 + ci, c]
      T* w = p.data();
      for (int k = 0; k < 9 * 3; ++k) {
        for (int co = 0; co < 3; ++co) w[static_cast<std::size_t>(k) * c + co] = T(0);
      }
      for (int co = 0; co < 3; ++co) {
        w[static_cast<std::size_t>(4 * 3 + co) * c + co] = T(1);  // center tap
      }
    }
    {
      const std::size_t offset = g.net.layer_offset(g.net.layer_count() - 2);
      T* w = p.data() + offset;
      for (std::size_t i = 0; i < static_cast<std::size_t>(9) * c * 3 + 3; ++i) w[i] = T(0);
      for (int co = 0; co < 3; ++co) {
        w[static_cast<std::size_t>(4 * c + co) * 3 + co] = T(1);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

template <typename T>
Classifier<T> build_classifier(Rng rng, std::vector<int> class_labels, ClassifierArch arch) {
  if (class_labels.empty()) throw std::invalid_argument("classifier: no class labels");
  if (arch.channels.size() != arch.pools.size()) {
    throw std::invalid_argument("classifier: channels/pools mismatch");
  }
  Classifier<T> c;
  c.arch = arch;
  c.class_labels = std::move(class_labels);
  c.net.add(std::make_unique<nn::HighPass<T>>(false));
  int cin = 3;
  int sz = arch.input;
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    c.net.add(std::make_unique<nn::Conv<T>>(3, cin, arch.channels[i], Act::relu));
    if (arch.pools[i] > 1) c.net.add(std::make_unique<nn::MaxPool<T>>(arch.pools[i]));
    cin = arch.channels[i];
    sz /= arch.pools[i];
  }
  c.net.add(std::make_unique<nn::Dense<T>>(sz * sz * cin, arch.hidden, Act::relu));
  c.net.add(std::make_unique<nn::Dense<T>>(arch.hidden, c.n_classes(), Act::none));
  c.net.finalize({arch.input, arch.input, 3}, rng);
  return c;
}

template <typename T>
std::vector<double> classify(const Classifier<T>& c, const Tensor<T>& patch) {
  if (patch.h != c.arch.input || patch.w != c.arch.input || patch.c != 3) {
    throw std::invalid_argument("classify: wrong patch size");
  }
  return nn::softmax(c.net.forward(patch));
}

std::vector<double> classify(const Classifier<float>& c, const Patch& patch) {
  return classify(c, nn::image_to_tensor<float>(patch.pixels));
}

// ---------------------------------------------------------------------------
// Siamese
// ---------------------------------------------------------------------------

std::string to_string(SiameseObjective o) {
  switch (o) {
    case SiameseObjective::camera_only: return "camera_only";
    case SiameseObjective::camera_plus_processing: return "camera_plus_processing";
    default: return "holdout";
  }
}

SiameseObjective siamese_objective_from_string(const std::string& s) {
  if (s == "camera_only") return SiameseObjective::camera_only;
  if (s == "camera_plus_processing") return SiameseObjective::camera_plus_processing;
  if (s == "holdout") return SiameseObjective::holdout;
  throw std::invalid_argument("unknown siamese objective: " + s);
}

template <typename T>
Siamese<T> build_siamese(Rng rng, SiameseArch arch) {
  if (arch.channels.size() != arch.pools.size()) {
    throw std::invalid_argument("siamese: channels/pools mismatch");
  }
  Siamese<T> s;
  s.arch = arch;
  s.extractor.add(std::make_unique<nn::HighPass<T>>(true));
  int cin = 6;
  int sz = arch.input;
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    s.extractor.add(std::make_unique<nn::Conv<T>>(3, cin, arch.channels[i], Act::relu));
    if (arch.pools[i] > 1) s.extractor.add(std::make_unique<nn::MaxPool<T>>(arch.pools[i]));
    cin = arch.channels[i];
    sz /= arch.pools[i];
  }
  s.extractor.add(std::make_unique<nn::Dense<T>>(sz * sz * cin, arch.embed_dim, Act::none));
  Rng rng_head = rng.derive(0x4ead);
  s.extractor.finalize({arch.input, arch.input, 3}, rng);
  s.head.add(std::make_unique<nn::Dense<T>>(2 * arch.embed_dim, arch.head_hidden, Act::relu));
  s.head.add(std::make_unique<nn::Dense<T>>(arch.head_hidden, 1, Act::none));
  s.head.finalize({1, 1, 2 * arch.embed_dim}, rng_head);
  return s;
}

template <typename T>
Tensor<T> siamese_combine(const Tensor<T>& f1, const Tensor<T>& f2) {
  const int n = static_cast<int>(f1.v.size());
  Tensor<T> out(1, 1, 2 * n);
  for (int i = 0; i < n; ++i) {
    out.v[i] = f1.v[i] * f2.v[i];
    const T d = f1.v[i] - f2.v[i];
    out.v[n + i] = d < T(0) ? -d : d;
  }
  return out;
}

template <typename T>
void siamese_combine_backward(const Tensor<T>& dcomb, const Tensor<T>& f1, const Tensor<T>& f2,
                              Tensor<T>& df1, Tensor<T>& df2) {
  const int n = static_cast<int>(f1.v.size());
  df1 = Tensor<T>(f1.h, f1.w, f1.c);
  df2 = Tensor<T>(f2.h, f2.w, f2.c);
  for (int i = 0; i < n; ++i) {
    const T d = f1.v[i] - f2.v[i];
    const T sg = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
    df1.v[i] = dcomb.v[i] * f2.v[i] + dcomb.v[n + i] * sg;
    df2.v[i] = dcomb.v[i] * f1.v[i] - dcomb.v[n + i] * sg;
  }
}

double similarity(const Siamese<float>& s, const Patch& a, const Patch& b) {
  return s.similarity(nn::image_to_tensor<float>(a.pixels), nn::image_to_tensor<float>(b.pixels));
}

// ---------------------------------------------------------------------------
// Classifier training
// ---------------------------------------------------------------------------

namespace {

double lr_at(double base, int epoch, int halve_every) {
  return base * std::pow(0.5, halve_every > 0 ? epoch / halve_every : 0);
}

}  // namespace

double classifier_accuracy(const Classifier<float>& c,
                           const std::vector<synthcam::PatchRecord>& patches) {
  if (patches.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& rec : patches) {
    const std::vector<double> p = classify(c, synthcam::record_tensor<float>(rec));
    const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (c.class_labels[pred] == rec.camera_id) ++correct;
  }
  return static_cast<double>(correct) / patches.size();
}

Classifier<float> train_classifier(const synthcam::Dataset& data,
                                   const ClassifierTrainConfig& config,
                                   ClassifierTrainReport* report) {
  const synthcam::DatasetSplit* train = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::train);
  const synthcam::DatasetSplit* val = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::val);
  const synthcam::DatasetSplit* test = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::test);
  if (!train || train->patches.empty()) throw std::invalid_argument("train split missing or empty");

  std::vector<int> labels;
  for (const auto& rec : train->patches) {
    if (std::find(labels.begin(), labels.end(), rec.camera_id) == labels.end()) {
      labels.push_back(rec.camera_id);
    }
  }
  std::sort(labels.begin(), labels.end());
  for (const auto& prof : data.profiles_seen) {
    if (std::find(labels.begin(), labels.end(), prof.id) == labels.end()) {
      throw std::invalid_argument("label missing from train split: camera " +
                                  std::to_string(prof.id));
    }
  }

  ClassifierTrainReport local;
  ClassifierTrainReport& rep = report ? *report : local;
  rep.single_class = labels.size() == 1;
  if (rep.single_class) {
    std::cerr << "train_classifier: single-class task, accuracy is trivially 1\n";
  }

  Rng rng(config.seed);
  Classifier<float> model = build_classifier<float>(rng.derive(1), labels);
  nn::Adam<float> adam(model.net.param_count());
  std::vector<float> grads(model.net.param_count(), 0.0f);

  std::vector<int> order(train->patches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<float> best_params = model.net.params();
  double best_val = -1.0;
  int best_epoch = -1;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config.lr, epoch, config.lr_halve_every);
    Rng erng = rng.derive(100 + epoch);
    erng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    const int max_steps = config.max_steps_per_epoch > 0
                              ? config.max_steps_per_epoch
                              : static_cast<int>((order.size() + config.batch - 1) / config.batch);
    for (int step = 0; step < max_steps; ++step) {
      const std::size_t begin = static_cast<std::size_t>(step) * config.batch;
      if (begin >= order.size()) break;
      const std::size_t end = std::min(order.size(), begin + config.batch);
      std::fill(grads.begin(), grads.end(), 0.0f);
      nn::Trace<float> tr;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& rec = train->patches[order[i]];
        const Tensor<float> x = synthcam::record_tensor<float>(rec);
        const Tensor<float> logits = model.net.forward(x, &tr);
        Tensor<float> dlogits;
        loss_sum += nn::softmax_ce(logits, model.class_of_label(rec.camera_id), 0.0, &dlogits,
                                   1.0 / static_cast<double>(end - begin));
        ++loss_n;
        model.net.backward(dlogits, tr, &grads);
      }
      adam.step(model.net.params(), grads, lr);
    }

    const double val_acc = val && !val->patches.empty() ? classifier_accuracy(model, val->patches)
                                                        : classifier_accuracy(model, train->patches);
    rep.epochs.push_back({epoch, lr, loss_n ? loss_sum / loss_n : 0.0, val_acc});
    if (config.verbose) {
      std::cerr << "classifier epoch " << epoch << " lr " << lr << " loss "
                << (loss_n ? loss_sum / loss_n : 0.0) << " val_acc " << val_acc << "\n";
    }
    if (val_acc > best_val) {
      best_val = val_acc;
      best_epoch = epoch;
      best_params = model.net.params();
    }
  }

  model.net.params() = best_params;
  rep.best_epoch = best_epoch;
  rep.best_val_accuracy = best_val;
  rep.test_accuracy = test && !test->patches.empty() ? classifier_accuracy(model, test->patches) : 0.0;
  return model;
}

// ---------------------------------------------------------------------------
// Siamese training
// ---------------------------------------------------------------------------

bool same_source_label(const synthcam::Dataset& data, SiameseObjective objective,
                       const synthcam::PatchRecord& a, const synthcam::PatchRecord& b) {
  const bool hw = data.hardware_group(a.camera_id) == data.hardware_group(b.camera_id);
  if (objective == SiameseObjective::camera_plus_processing) {
    const synthcam::CameraProfile* pa = data.profile_by_id(a.camera_id);
    const synthcam::CameraProfile* pb = data.profile_by_id(b.camera_id);
    return hw && pa && pb && pa->jpeg_quality == pb->jpeg_quality;
  }
  return hw;
}

namespace {

struct PairSampler {
  // record indices grouped by "source" key of the objective
  std::vector<std::vector<int>> groups;
  const std::vector<synthcam::PatchRecord>* records = nullptr;

  PairSampler(const synthcam::Dataset& data, SiameseObjective objective,
              const std::vector<synthcam::PatchRecord>& recs,
              const std::vector<int>& allowed_profiles)
      : records(&recs) {
    std::vector<long> keys;  // group key per group index
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const int cam = recs[i].camera_id;
      if (!allowed_profiles.empty() &&
          std::find(allowed_profiles.begin(), allowed_profiles.end(), cam) ==
              allowed_profiles.end()) {
        continue;
      }
      long key;
      if (objective == SiameseObjective::camera_plus_processing) {
        const synthcam::CameraProfile* p = data.profile_by_id(cam);
        key = static_cast<long>(data.hardware_group(cam)) * 1000 + (p ? p->jpeg_quality + 2 : 0);
      } else {
        key = data.hardware_group(cam);
      }
      std::size_t g = 0;
      for (; g < keys.size(); ++g) {
        if (keys[g] == key) break;
      }
      if (g == keys.size()) {
        keys.push_back(key);
        groups.emplace_back();
      }
      groups[g].push_back(static_cast<int>(i));
    }
  }

  bool valid() const { return groups.size() >= 2; }

  std::pair<int, int> draw(Rng& rng, bool same) const {
    if (same) {
      const auto& g = groups[rng.index(groups.size())];
      return {g[rng.index(g.size())], g[rng.index(g.size())]};
    }
    std::size_t a = rng.index(groups.size());
    std::size_t b = rng.index(groups.size() - 1);
    if (b >= a) ++b;
    return {groups[a][rng.index(groups[a].size())], groups[b][rng.index(groups[b].size())]};
  }
};

struct PairGrad {
  std::vector<float> extractor;
  std::vector<float> head;
};

// BCE-with-logits step for one pair; returns the loss.
double pair_backward(const Siamese<float>& s, const Tensor<float>& xa, const Tensor<float>& xb,
                     double target, double weight, PairGrad* grads) {
  nn::Trace<float> tra, trb, trh;
  const Tensor<float> fa = s.extractor.forward(xa, grads ? &tra : nullptr);
  const Tensor<float> fb = s.extractor.forward(xb, grads ? &trb : nullptr);
  const Tensor<float> comb = siamese_combine(fa, fb);
  const Tensor<float> out = s.head.forward(comb, grads ? &trh : nullptr);
  const double logit = out.v[0];
  const double loss =
      target > 0.5 ? nn::softplus_neg(logit) : nn::softplus_neg(logit) + logit;  // -log p(target)
  if (grads) {
    Tensor<float> dlogit(1, 1, 1);
    dlogit.v[0] = static_cast<float>((nn::sigmoid(logit) - target) * weight);
    const Tensor<float> dcomb = s.head.backward(dlogit, trh, &grads->head);
    Tensor<float> dfa, dfb;
    siamese_combine_backward(dcomb, fa, fb, dfa, dfb);
    s.extractor.backward(dfa, tra, &grads->extractor);
    s.extractor.backward(dfb, trb, &grads->extractor);
  }
  return loss;
}

}  // namespace

double siamese_pair_accuracy(const Siamese<float>& s, const synthcam::Dataset& data,
                             const std::vector<synthcam::PatchRecord>& records, int n_pairs,
                             std::uint64_t seed) {
  PairSampler sampler(data, s.objective, records, {});
  if (!sampler.valid()) throw std::invalid_argument("pair accuracy needs two source groups");
  Rng rng(seed);
  std::size_t correct = 0;
  for (int i = 0; i < n_pairs; ++i) {
    const bool same = i % 2 == 0;
    const auto [ia, ib] = sampler.draw(rng, same);
    const double score = s.similarity(synthcam::record_tensor<float>(records[ia]),
                                      synthcam::record_tensor<float>(records[ib]));
    if ((score > 0.5) == same) ++correct;
  }
  return static_cast<double>(correct) / n_pairs;
}

Siamese<float> train_siamese(const synthcam::Dataset& data, SiameseObjective objective,
                             const SiameseTrainConfig& config, SiameseTrainReport* report) {
  const synthcam::DatasetSplit* train = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::train);
  const synthcam::DatasetSplit* val = data.find(synthcam::SplitGroup::seen, synthcam::SplitRole::val);
  if (!train || train->patches.empty()) throw std::invalid_argument("train split missing or empty");

  {
    std::vector<int> distinct;
    for (const auto& rec : train->patches) {
      if (!config.train_profile_ids.empty() &&
          std::find(config.train_profile_ids.begin(), config.train_profile_ids.end(),
                    rec.camera_id) == config.train_profile_ids.end()) {
        continue;
      }
      if (std::find(distinct.begin(), distinct.end(), rec.camera_id) == distinct.end()) {
        distinct.push_back(rec.camera_id);
      }
    }
    if (distinct.size() < 2) {
      throw std::invalid_argument("train_siamese: need at least two camera models");
    }
  }

  PairSampler sampler(data, objective, train->patches, config.train_profile_ids);
  if (!sampler.valid()) {
    throw std::invalid_argument("train_siamese: the profile subset has no different-source pairs");
  }

  Rng rng(config.seed);
  Siamese<float> model = build_siamese<float>(rng.derive(1), config.arch);
  model.objective = objective;
  model.train_profile_ids = config.train_profile_ids.empty() ? data.seen_ids() : config.train_profile_ids;

  nn::Adam<float> adam_ex(model.extractor.param_count());
  nn::Adam<float> adam_head(model.head.param_count());
  PairGrad grads;
  grads.extractor.assign(model.extractor.param_count(), 0.0f);
  grads.head.assign(model.head.param_count(), 0.0f);

  // fixed validation pair set
  struct ValPair {
    int a, b;
    bool same;
  };
  std::vector<ValPair> val_pairs;
  {
    const auto& vrecs = (val && !val->patches.empty()) ? val->patches : train->patches;
    PairSampler vsampler(data, objective, vrecs, config.train_profile_ids);
    Rng vrng = rng.derive(0x7a1);
    for (int i = 0; i < config.val_pairs && vsampler.valid(); ++i) {
      const bool same = i % 2 == 0;
      const auto [a, b] = vsampler.draw(vrng, same);
      val_pairs.push_back({a, b, same});
    }
  }
  const auto& vrecs = (val && !val->patches.empty()) ? val->patches : train->patches;

  auto val_accuracy = [&]() {
    if (val_pairs.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& vp : val_pairs) {
      const double score = model.similarity(synthcam::record_tensor<float>(vrecs[vp.a]),
                                            synthcam::record_tensor<float>(vrecs[vp.b]));
      if ((score > 0.5) == vp.same) ++correct;
    }
    return static_cast<double>(correct) / val_pairs.size();
  };

  SiameseTrainReport local;
  SiameseTrainReport& rep = report ? *report : local;
  std::vector<float> best_ex = model.extractor.params();
  std::vector<float> best_head = model.head.params();
  double best_val = -1.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config.lr, epoch, config.lr_halve_every);
    Rng erng = rng.derive(100 + epoch);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    const int steps = std::max(1, config.pairs_per_epoch / config.batch_pairs);
    for (int step = 0; step < steps; ++step) {
      std::fill(grads.extractor.begin(), grads.extractor.end(), 0.0f);
      std::fill(grads.head.begin(), grads.head.end(), 0.0f);
      for (int i = 0; i < config.batch_pairs; ++i) {
        const bool same = i % 2 == 0;
        const auto [ia, ib] = sampler.draw(erng, same);
        loss_sum += pair_backward(model, synthcam::record_tensor<float>(train->patches[ia]),
                                  synthcam::record_tensor<float>(train->patches[ib]),
                                  same ? 1.0 : 0.0, 1.0 / config.batch_pairs, &grads);
        ++loss_n;
      }
      adam_ex.step(model.extractor.params(), grads.extractor, lr);
      adam_head.step(model.head.params(), grads.head, lr);
    }

    const double vacc = val_accuracy();
    rep.epochs.push_back({epoch, lr, loss_n ? loss_sum / loss_n : 0.0, vacc});
    if (config.verbose) {
      std::cerr << "siamese(" << to_string(objective) << ") epoch " << epoch << " loss "
                << (loss_n ? loss_sum / loss_n : 0.0) << " val_acc " << vacc << "\n";
    }
    if (vacc > best_val) {
      best_val = vacc;
      rep.best_epoch = epoch;
      best_ex = model.extractor.params();
      best_head = model.head.params();
    }
  }

  model.extractor.params() = best_ex;
  model.head.params() = best_head;
  rep.best_val_accuracy = best_val;
  return model;
}

// ---------------------------------------------------------------------------
// Explicit instantiations
// ---------------------------------------------------------------------------

template Generator<float> build_generator<float>(Rng, GeneratorInit, GeneratorArch);
template Generator<double> build_generator<double>(Rng, GeneratorInit, GeneratorArch);
template Classifier<float> build_classifier<float>(Rng, std::vector<int>, ClassifierArch);
template Classifier<double> build_classifier<double>(Rng, std::vector<int>, ClassifierArch);
template Siamese<float> build_siamese<float>(Rng, SiameseArch);
template Siamese<double> build_siamese<double>(Rng, SiameseArch);
template std::vector<double> classify<float>(const Classifier<float>&, const Tensor<float>&);
template std::vector<double> classify<double>(const Classifier<double>&, const Tensor<double>&);
template Tensor<float> siamese_combine<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> siamese_combine<double>(const Tensor<double>&, const Tensor<double>&);
template void siamese_combine_backward<float>(const Tensor<float>&, const Tensor<float>&,
                                              const Tensor<float>&, Tensor<float>&, Tensor<float>&);
template void siamese_combine_backward<double>(const Tensor<double>&, const Tensor<double>&,
                                               const Tensor<double>&, Tensor<double>&,
                                               Tensor<double>&);

}  // namespace traceforge::nets
