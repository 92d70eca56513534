#pragma once

#include <optional>
#include <string>
#include <vector>

namespace traceforge::cli {

// Each command owns one run directory: resolved config.json, checkpoints/,
// outputs/, log.csv, report.json. Exit code 0 on success; errors surface as
// exceptions that main() turns into categorized nonzero exits.

struct DatasetOptions {
  std::string out;
  std::string config_file;
  std::optional<std::uint64_t> seed;
  bool with_benchmark = true;
};
int cmd_dataset(const DatasetOptions& opt);

struct TrainOptions {
  std::string target;  // classifier | siamese | attack-phase1 | attack-phase2
  std::string data;    // dataset directory
  std::string out;
  std::string config_file;
  std::string objective = "camera_only";   // siamese
  std::vector<std::string> siamese_ckpts;  // phase 2
  std::vector<double> betas;               // phase 2
  std::string init_ckpt;                   // phase 2: generator init ("" = fresh)
  std::string classifier_ckpt;             // phase 1
  std::optional<std::uint64_t> seed;
  std::optional<int> target_camera;
};
int cmd_train(const TrainOptions& opt);

struct AttackOptions {
  std::string method = "generator";  // generator | fgsm | pgd | cw | lots
  std::string generator_ckpt;
  std::string siamese_ckpt;  // baselines
  std::string images;        // benchmark directory
  std::string out;
  std::string config_file;
  std::optional<int> tile;
  std::optional<int> sampling_patches;  // attacker grid for baselines
  bool lots_use_mask = true;
  std::string region_masks;  // when set: region-targeted generator attack on authentic images
};
int cmd_attack(const AttackOptions& opt);

struct AnalyzeOptions {
  std::string detector = "fsg";  // fsg | exif
  std::string task = "detect";   // detect | localize
  std::string siamese_ckpt;
  std::string images;  // benchmark directory
  std::string out;
  std::string config_file;
  std::optional<int> sampling_patches;
  std::string tag_strategy = "untagged";
  std::string tag_dataset = "synthetic";
};
int cmd_analyze(const AnalyzeOptions& opt);

struct ReportOptions {
  std::vector<std::string> runs;
  std::string out;
};
int cmd_report(const ReportOptions& opt);

}  // namespace traceforge::cli
