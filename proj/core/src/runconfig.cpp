#include "traceforge/runconfig.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace traceforge::runcfg {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json profile_to_json(const synthcam::CameraProfile& p) {
  return json{{"id", p.id},
              {"demosaic_kernel", p.demosaic_kernel},
              {"jpeg_quality", p.jpeg_quality},
              {"noise_std", p.noise_std},
              {"gamma", p.gamma}};
}

synthcam::CameraProfile profile_from_json(const json& j) {
  synthcam::CameraProfile p;
  p.id = j.at("id").get<int>();
  const auto k = j.at("demosaic_kernel").get<std::vector<double>>();
  if (k.size() != 9) throw std::runtime_error("camera profile kernel needs 9 entries");
  std::copy(k.begin(), k.end(), p.demosaic_kernel.begin());
  p.jpeg_quality = j.at("jpeg_quality").get<int>();
  p.noise_std = j.at("noise_std").get<double>();
  p.gamma = j.at("gamma").get<double>();
  synthcam::validate_profile(p);
  return p;
}

template <typename T>
void opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;

  json profiles_seen = json::array(), profiles_unseen = json::array();
  for (const auto& p : dataset.profiles_seen) profiles_seen.push_back(profile_to_json(p));
  for (const auto& p : dataset.profiles_unseen) profiles_unseen.push_back(profile_to_json(p));
  j["dataset"] = {{"profiles_seen", profiles_seen},
                  {"profiles_unseen", profiles_unseen},
                  {"train_per_profile", dataset.counts.train},
                  {"val_per_profile", dataset.counts.val},
                  {"test_per_profile", dataset.counts.test},
                  {"base_height", dataset.base_height},
                  {"base_width", dataset.base_width}};

  j["benchmark"] = {{"n_spliced", benchmark.n_spliced},
                    {"n_authentic", benchmark.n_authentic},
                    {"image_height", benchmark.image_height},
                    {"image_width", benchmark.image_width},
                    {"mask_min_frac", benchmark.mask_min_frac},
                    {"mask_max_frac", benchmark.mask_max_frac}};

  j["classifier"] = {{"lr", classifier.lr},
                     {"lr_halve_every", classifier.lr_halve_every},
                     {"epochs", classifier.epochs},
                     {"batch", classifier.batch},
                     {"max_steps_per_epoch", classifier.max_steps_per_epoch},
                     {"seed", classifier.seed}};

  j["siamese"] = {{"lr", siamese.lr},
                  {"lr_halve_every", siamese.lr_halve_every},
                  {"epochs", siamese.epochs},
                  {"pairs_per_epoch", siamese.pairs_per_epoch},
                  {"batch_pairs", siamese.batch_pairs},
                  {"val_pairs", siamese.val_pairs},
                  {"embed_dim", siamese.arch.embed_dim},
                  {"seed", siamese.seed}};
  j["siamese_profiles_primary"] = siamese_profiles_primary;
  j["siamese_profiles_holdout"] = siamese_profiles_holdout;

  j["phase1"] = {{"alpha", phase1.alpha},
                 {"target_camera", phase1.target_camera},
                 {"randomize_target", phase1.randomize_target},
                 {"lr", phase1.lr},
                 {"lr_halve_every", phase1.lr_halve_every},
                 {"epochs", phase1.epochs},
                 {"batch", phase1.batch},
                 {"steps_per_epoch", phase1.steps_per_epoch},
                 {"val_patches", phase1.val_patches},
                 {"min_psnr", phase1.min_psnr},
                 {"log_epsilon", phase1.log_epsilon},
                 {"seed", phase1.seed}};

  j["phase2"] = {{"betas", phase2.betas},
                 {"lr", phase2.lr},
                 {"lr_halve_every", phase2.lr_halve_every},
                 {"max_epochs", phase2.max_epochs},
                 {"pool_size", phase2.pool_size},
                 {"pairs_per_batch", phase2.pairs_per_batch},
                 {"steps_per_epoch", phase2.steps_per_epoch},
                 {"val_pairs", phase2.val_pairs},
                 {"val_pool_patches", phase2.val_pool_patches},
                 {"log_epsilon", phase2.log_epsilon},
                 {"seed", phase2.seed}};

  j["analysis_sampling_patches"] = analysis_sampling_patches;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  RunConfig c;
  opt(j, "seed", c.seed);
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    if (d.contains("profiles_seen")) {
      c.dataset.profiles_seen.clear();
      for (const auto& p : d.at("profiles_seen")) {
        c.dataset.profiles_seen.push_back(profile_from_json(p));
      }
    }
    if (d.contains("profiles_unseen")) {
      c.dataset.profiles_unseen.clear();
      for (const auto& p : d.at("profiles_unseen")) {
        c.dataset.profiles_unseen.push_back(profile_from_json(p));
      }
    }
    opt(d, "train_per_profile", c.dataset.counts.train);
    opt(d, "val_per_profile", c.dataset.counts.val);
    opt(d, "test_per_profile", c.dataset.counts.test);
    opt(d, "base_height", c.dataset.base_height);
    opt(d, "base_width", c.dataset.base_width);
  }
  if (j.contains("benchmark")) {
    const json& b = j.at("benchmark");
    opt(b, "n_spliced", c.benchmark.n_spliced);
    opt(b, "n_authentic", c.benchmark.n_authentic);
    opt(b, "image_height", c.benchmark.image_height);
    opt(b, "image_width", c.benchmark.image_width);
    opt(b, "mask_min_frac", c.benchmark.mask_min_frac);
    opt(b, "mask_max_frac", c.benchmark.mask_max_frac);
  }
  if (j.contains("classifier")) {
    const json& t = j.at("classifier");
    opt(t, "lr", c.classifier.lr);
    opt(t, "lr_halve_every", c.classifier.lr_halve_every);
    opt(t, "epochs", c.classifier.epochs);
    opt(t, "batch", c.classifier.batch);
    opt(t, "max_steps_per_epoch", c.classifier.max_steps_per_epoch);
    opt(t, "seed", c.classifier.seed);
  }
  if (j.contains("siamese")) {
    const json& t = j.at("siamese");
    opt(t, "lr", c.siamese.lr);
    opt(t, "lr_halve_every", c.siamese.lr_halve_every);
    opt(t, "epochs", c.siamese.epochs);
    opt(t, "pairs_per_epoch", c.siamese.pairs_per_epoch);
    opt(t, "batch_pairs", c.siamese.batch_pairs);
    opt(t, "val_pairs", c.siamese.val_pairs);
    opt(t, "embed_dim", c.siamese.arch.embed_dim);
    opt(t, "seed", c.siamese.seed);
  }
  opt(j, "siamese_profiles_primary", c.siamese_profiles_primary);
  opt(j, "siamese_profiles_holdout", c.siamese_profiles_holdout);
  if (j.contains("phase1")) {
    const json& t = j.at("phase1");
    opt(t, "alpha", c.phase1.alpha);
    opt(t, "target_camera", c.phase1.target_camera);
    opt(t, "randomize_target", c.phase1.randomize_target);
    opt(t, "lr", c.phase1.lr);
    opt(t, "lr_halve_every", c.phase1.lr_halve_every);
    opt(t, "epochs", c.phase1.epochs);
    opt(t, "batch", c.phase1.batch);
    opt(t, "steps_per_epoch", c.phase1.steps_per_epoch);
    opt(t, "val_patches", c.phase1.val_patches);
    opt(t, "min_psnr", c.phase1.min_psnr);
    opt(t, "log_epsilon", c.phase1.log_epsilon);
    opt(t, "seed", c.phase1.seed);
  }
  if (j.contains("phase2")) {
    const json& t = j.at("phase2");
    opt(t, "betas", c.phase2.betas);
    opt(t, "lr", c.phase2.lr);
    opt(t, "lr_halve_every", c.phase2.lr_halve_every);
    opt(t, "max_epochs", c.phase2.max_epochs);
    opt(t, "pool_size", c.phase2.pool_size);
    opt(t, "pairs_per_batch", c.phase2.pairs_per_batch);
    opt(t, "steps_per_epoch", c.phase2.steps_per_epoch);
    opt(t, "val_pairs", c.phase2.val_pairs);
    opt(t, "val_pool_patches", c.phase2.val_pool_patches);
    opt(t, "log_epsilon", c.phase2.log_epsilon);
    opt(t, "seed", c.phase2.seed);
  }
  opt(j, "analysis_sampling_patches", c.analysis_sampling_patches);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config: " + path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return RunConfig::from_json(text);
}

void save_config(const RunConfig& config, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write config: " + path);
  os << config.to_json() << "\n";
}

void init_run_dir(const std::string& dir, const RunConfig& config) {
  fs::create_directories(fs::path(dir) / "checkpoints");
  fs::create_directories(fs::path(dir) / "outputs");
  const fs::path cfg = fs::path(dir) / "config.json";
  if (fs::exists(cfg)) {
    std::ifstream is(cfg);
    std::string existing((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (existing != config.to_json() + "\n") {
      throw std::runtime_error("run directory already holds a different config: " + dir);
    }
    return;
  }
  save_config(config, cfg.string());
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot hash missing file: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (is) {
    is.read(buf, sizeof(buf));
    h = fnv1a_bytes(buf, static_cast<std::size_t>(is.gcount()), h);
  }
  return h;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path) {
  std::ofstream os(path_);
  if (!os) throw std::runtime_error("cannot write csv: " + path_);
  for (std::size_t i = 0; i < header.size(); ++i) {
    os << header[i] << (i + 1 < header.size() ? "," : "\n");
  }
}

void CsvWriter::row(const std::vector<double>& values) {
  std::ofstream os(path_, std::ios::app);
  for (std::size_t i = 0; i < values.size(); ++i) {
    os << values[i] << (i + 1 < values.size() ? "," : "\n");
  }
}

}  // namespace traceforge::runcfg
