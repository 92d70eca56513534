#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "traceforge/attack.hpp"
#include "traceforge/baselines.hpp"
#include "traceforge/models.hpp"
#include "traceforge/synthcam.hpp"

namespace traceforge::runcfg {

/// Everything a pipeline run needs, with defaults that fit a desk-scale CPU
/// budget. Every command resolves its configuration (file + flags + defaults)
/// and persists the result into its run directory, so a run can be repeated
/// bit for bit from `config.json` alone.
struct RunConfig {
  std::uint64_t seed = 1;

  synthcam::DatasetConfig dataset;
  synthcam::BenchmarkConfig benchmark;

  nets::ClassifierTrainConfig classifier;
  nets::SiameseTrainConfig siamese;
  // Profile ids for the directly targeted networks and for the held-out
  // transfer network; they are disjoint by default.
  std::vector<int> siamese_profiles_primary{0, 1, 4, 5};
  std::vector<int> siamese_profiles_holdout{2, 3};

  attack::Phase1Config phase1;
  attack::Phase2Config phase2;

  int analysis_sampling_patches = 12;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

/// Creates `<dir>`, `<dir>/checkpoints`, `<dir>/outputs` and persists the
/// resolved config; refuses to reuse a directory holding another run's config
/// unless it is identical.
void init_run_dir(const std::string& dir, const RunConfig& config);

/// FNV-1a content hash, used by determinism checks over produced artifacts.
std::uint64_t fnv1a_file(const std::string& path);
std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL);

/// Minimal CSV writer for run logs.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);

 private:
  std::string path_;
};

}  // namespace traceforge::runcfg
