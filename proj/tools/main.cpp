#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "traceforge/runconfig.hpp"

int main(int argc, char** argv) {
  CLI::App app{"traceforge: synthetic-trace attacks and splicing forensics at desk scale"};
  app.require_subcommand(1);

  traceforge::cli::DatasetOptions dopt;
  CLI::App* dataset = app.add_subcommand("dataset", "generate the patch dataset and splice benchmark");
  dataset->add_option("--out", dopt.out, "run directory")->required();
  dataset->add_option("--config", dopt.config_file, "config json");
  std::uint64_t dseed = 0;
  CLI::Option* dseed_opt = dataset->add_option("--seed", dseed, "override config seed");
  dataset->add_flag("--no-benchmark{false}", dopt.with_benchmark, "skip the splice benchmark");

  traceforge::cli::TrainOptions topt;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("target", topt.target, "classifier | siamese | attack-phase1 | attack-phase2")
      ->required();
  train->add_option("--data", topt.data, "dataset directory (from `dataset`)")->required();
  train->add_option("--out", topt.out, "run directory")->required();
  train->add_option("--config", topt.config_file, "config json");
  train->add_option("--objective", topt.objective,
                    "siamese objective: camera_only | camera_plus_processing | holdout");
  train->add_option("--siamese", topt.siamese_ckpts, "siamese checkpoints (phase 2)");
  train->add_option("--betas", topt.betas, "per-network similarity weights (phase 2)");
  train->add_option("--init", topt.init_ckpt, "generator init checkpoint (phase 2)");
  train->add_option("--classifier", topt.classifier_ckpt, "classifier checkpoint (phase 1)");
  std::uint64_t tseed = 0;
  CLI::Option* tseed_opt = train->add_option("--seed", tseed, "override config seed");
  int tcam = 0;
  CLI::Option* tcam_opt = train->add_option("--target-camera", tcam, "phase 1 target camera id");

  traceforge::cli::AttackOptions aopt;
  CLI::App* attack = app.add_subcommand("attack", "attack benchmark images");
  attack->add_option("--method", aopt.method, "generator | fgsm | pgd | cw | lots");
  attack->add_option("--generator", aopt.generator_ckpt, "generator checkpoint");
  attack->add_option("--siamese", aopt.siamese_ckpt, "siamese checkpoint (baselines)");
  attack->add_option("--images", aopt.images, "benchmark directory")->required();
  attack->add_option("--out", aopt.out, "run directory")->required();
  attack->add_option("--config", aopt.config_file, "config json");
  int tile = 0;
  CLI::Option* tile_opt = attack->add_option("--tile", tile, "tile size for deployment");
  int asamp = 0;
  CLI::Option* asamp_opt =
      attack->add_option("--sampling", asamp, "attacker grid sampling patches (baselines)");
  attack->add_flag("--no-mask{false}", aopt.lots_use_mask, "lots: do not use the ground-truth mask");
  attack->add_flag_callback(
      "--region", [&aopt]() { aopt.region_masks = "random"; },
      "region-target authentic images instead of attacking spliced ones");

  traceforge::cli::AnalyzeOptions nopt;
  CLI::App* analyze = app.add_subcommand("analyze", "run a forensic detector or localizer");
  analyze->add_option("--detector", nopt.detector, "fsg | exif");
  analyze->add_option("--task", nopt.task, "detect | localize");
  analyze->add_option("--siamese", nopt.siamese_ckpt, "siamese checkpoint")->required();
  analyze->add_option("--images", nopt.images, "benchmark directory")->required();
  analyze->add_option("--out", nopt.out, "run directory")->required();
  analyze->add_option("--config", nopt.config_file, "config json");
  int nsamp = 0;
  CLI::Option* nsamp_opt = analyze->add_option("--sampling", nsamp, "analysis grid sampling patches");
  analyze->add_option("--tag-strategy", nopt.tag_strategy, "strategy label for reports");
  analyze->add_option("--tag-dataset", nopt.tag_dataset, "dataset label for reports");

  traceforge::cli::ReportOptions ropt;
  CLI::App* report = app.add_subcommand("report", "merge run reports into tables");
  report->add_option("--runs", ropt.runs, "run directories")->required();
  report->add_option("--out", ropt.out, "output directory")->required();

  CLI::App* cfg = app.add_subcommand("config", "write the default config json");
  std::string cfg_out;
  cfg->add_option("--out", cfg_out, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (dataset->parsed()) {
      if (dseed_opt->count()) dopt.seed = dseed;
      return traceforge::cli::cmd_dataset(dopt);
    }
    if (train->parsed()) {
      if (tseed_opt->count()) topt.seed = tseed;
      if (tcam_opt->count()) topt.target_camera = tcam;
      return traceforge::cli::cmd_train(topt);
    }
    if (attack->parsed()) {
      if (tile_opt->count()) aopt.tile = tile;
      if (asamp_opt->count()) aopt.sampling_patches = asamp;
      return traceforge::cli::cmd_attack(aopt);
    }
    if (analyze->parsed()) {
      if (nsamp_opt->count()) nopt.sampling_patches = nsamp;
      return traceforge::cli::cmd_analyze(nopt);
    }
    if (report->parsed()) return traceforge::cli::cmd_report(ropt);
    if (cfg->parsed()) {
      traceforge::runcfg::RunConfig def;
      def.phase2.betas = {800.0, 30.0};
      traceforge::runcfg::save_config(def, cfg_out);
      std::cout << "default config written to " << cfg_out << "\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
