#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "traceforge/checkpoint.hpp"
#include "traceforge/evalrun.hpp"
#include "traceforge/runconfig.hpp"

namespace traceforge::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

runcfg::RunConfig resolve_config(const std::string& file, std::optional<std::uint64_t> seed) {
  runcfg::RunConfig cfg = file.empty() ? runcfg::RunConfig{} : runcfg::load_config(file);
  if (seed.has_value()) cfg.seed = *seed;
  if (cfg.phase2.betas.empty()) cfg.phase2.betas = {800.0, 30.0};
  return cfg;
}

void write_report(const std::string& dir, const json& entries) {
  std::ofstream os(fs::path(dir) / "report.json");
  os << entries.dump(2) << "\n";
}

void write_epoch_csv(const std::string& dir, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
  runcfg::CsvWriter csv((fs::path(dir) / "log.csv").string(), header);
  for (const auto& r : rows) csv.row(r);
}

}  // namespace

int cmd_dataset(const DatasetOptions& opt) {
  runcfg::RunConfig cfg = resolve_config(opt.config_file, opt.seed);
  runcfg::init_run_dir(opt.out, cfg);
  std::cout << "generating dataset (seed " << cfg.seed << ")...\n";
  const synthcam::Dataset data = synthcam::generate_dataset(cfg.dataset, RngSeed{cfg.seed});
  synthcam::save_dataset(data, (fs::path(opt.out) / "outputs" / "dataset").string());
  if (opt.with_benchmark) {
    std::cout << "generating splice benchmark...\n";
    const synthcam::SpliceBenchmark bench =
        synthcam::make_benchmark(cfg.dataset.profiles_seen, cfg.benchmark, RngSeed{cfg.seed + 1});
    synthcam::save_benchmark(bench, (fs::path(opt.out) / "outputs" / "benchmark").string());
  }
  std::cout << "dataset written to " << opt.out << "/outputs\n";
  return 0;
}

int cmd_train(const TrainOptions& opt) {
  runcfg::RunConfig cfg = resolve_config(opt.config_file, opt.seed);
  runcfg::init_run_dir(opt.out, cfg);
  const synthcam::Dataset data = synthcam::load_dataset(opt.data);
  const fs::path ckpt_dir = fs::path(opt.out) / "checkpoints";

  if (opt.target == "classifier") {
    nets::ClassifierTrainReport rep;
    const nets::Classifier<float> model = nets::train_classifier(data, cfg.classifier, &rep);
    ckpt::save_classifier(model, (ckpt_dir / "classifier.ckpt").string());
    std::vector<std::vector<double>> rows;
    for (const auto& e : rep.epochs) {
      rows.push_back({static_cast<double>(e.epoch), e.lr, e.train_loss, e.val_metric});
    }
    write_epoch_csv(opt.out, {"epoch", "lr", "train_loss", "val_accuracy"}, rows);
    write_report(opt.out, json{{"kind", "classifier"},
                               {"best_val_accuracy", rep.best_val_accuracy},
                               {"test_accuracy", rep.test_accuracy}});
    std::cout << "classifier test accuracy " << rep.test_accuracy << "\n";
    return 0;
  }

  if (opt.target == "siamese") {
    nets::SiameseTrainConfig scfg = cfg.siamese;
    const nets::SiameseObjective objective = nets::siamese_objective_from_string(opt.objective);
    if (scfg.train_profile_ids.empty()) {
      scfg.train_profile_ids = objective == nets::SiameseObjective::holdout
                                   ? cfg.siamese_profiles_holdout
                                   : cfg.siamese_profiles_primary;
    }
    nets::SiameseTrainReport rep;
    const nets::Siamese<float> model = nets::train_siamese(data, objective, scfg, &rep);
    ckpt::save_siamese(model, (ckpt_dir / ("siamese_" + opt.objective + ".ckpt")).string());
    std::vector<std::vector<double>> rows;
    for (const auto& e : rep.epochs) {
      rows.push_back({static_cast<double>(e.epoch), e.lr, e.train_loss, e.val_metric});
    }
    write_epoch_csv(opt.out, {"epoch", "lr", "train_loss", "val_pair_accuracy"}, rows);
    write_report(opt.out, json{{"kind", "siamese"},
                               {"objective", opt.objective},
                               {"best_val_accuracy", rep.best_val_accuracy}});
    std::cout << "siamese (" << opt.objective << ") best val pair accuracy "
              << rep.best_val_accuracy << "\n";
    return 0;
  }

  if (opt.target == "attack-phase1") {
    if (opt.classifier_ckpt.empty()) throw std::runtime_error("phase 1 needs --classifier");
    const nets::Classifier<float> cls = ckpt::load_classifier(opt.classifier_ckpt);
    attack::Phase1Config pcfg = cfg.phase1;
    if (opt.target_camera.has_value()) pcfg.target_camera = *opt.target_camera;
    nets::Generator<float> gen = nets::build_generator<float>(Rng(cfg.seed));
    const attack::AttackTrainReport rep = attack::train_phase1(gen, cls, data, pcfg);
    ckpt::save_generator(gen, (ckpt_dir / "generator_phase1.ckpt").string());
    std::vector<std::vector<double>> rows;
    for (const auto& e : rep.epochs) {
      rows.push_back({static_cast<double>(e.epoch), e.lr, e.loss, e.loss_classification,
                      e.loss_perceptual, e.val_metric, e.val_psnr});
    }
    write_epoch_csv(opt.out,
                    {"epoch", "lr", "loss", "loss_classification", "loss_perceptual",
                     "val_target_fraction", "val_psnr"},
                    rows);
    write_report(opt.out, json{{"kind", "attack-phase1"},
                               {"best_epoch", rep.best_epoch},
                               {"best_target_fraction", rep.best_metric}});
    std::cout << "phase 1 best validation target fraction " << rep.best_metric << "\n";
    return 0;
  }

  if (opt.target == "attack-phase2") {
    if (opt.siamese_ckpts.empty()) throw std::runtime_error("phase 2 needs --siamese");
    std::vector<nets::Siamese<float>> nets_storage;
    nets_storage.reserve(opt.siamese_ckpts.size());
    for (const std::string& p : opt.siamese_ckpts) nets_storage.push_back(ckpt::load_siamese(p));
    attack::Phase2Config pcfg = cfg.phase2;
    if (!opt.betas.empty()) pcfg.betas = opt.betas;
    if (pcfg.betas.size() != nets_storage.size()) {
      throw std::runtime_error("need one beta per siamese checkpoint");
    }
    std::vector<std::pair<const nets::Siamese<float>*, double>> ensemble;
    for (std::size_t i = 0; i < nets_storage.size(); ++i) {
      ensemble.emplace_back(&nets_storage[i], pcfg.betas[i]);
    }
    nets::Generator<float> gen = opt.init_ckpt.empty()
                                     ? nets::build_generator<float>(Rng(cfg.seed))
                                     : ckpt::load_generator(opt.init_ckpt);
    const attack::AttackTrainReport rep = attack::train_phase2(gen, ensemble, data, pcfg);
    ckpt::save_generator(gen, (ckpt_dir / "generator_phase2.ckpt").string());
    std::vector<std::string> header{"epoch", "lr", "loss", "loss_perceptual"};
    for (std::size_t i = 0; i < nets_storage.size(); ++i) {
      header.push_back("loss_similarity_" + std::to_string(i + 1));
    }
    header.push_back("val_sar");
    header.push_back("val_psnr");
    std::vector<std::vector<double>> rows;
    for (const auto& e : rep.epochs) {
      std::vector<double> r{static_cast<double>(e.epoch), e.lr, e.loss, e.loss_perceptual};
      for (double v : e.loss_per_network) r.push_back(v);
      r.push_back(e.val_metric);
      r.push_back(e.val_psnr);
      rows.push_back(std::move(r));
    }
    write_epoch_csv(opt.out, header, rows);
    write_report(opt.out, json{{"kind", "attack-phase2"},
                               {"best_epoch", rep.best_epoch},
                               {"best_val_sar", rep.best_metric},
                               {"stopped_early", rep.stopped_early}});
    std::cout << "phase 2 best validation SAR " << rep.best_metric << "\n";
    return 0;
  }

  throw std::runtime_error("unknown training target: " + opt.target);
}

int cmd_attack(const AttackOptions& opt) {
  runcfg::RunConfig cfg = resolve_config(opt.config_file, std::nullopt);
  runcfg::init_run_dir(opt.out, cfg);
  synthcam::SpliceBenchmark bench = synthcam::load_benchmark(opt.images);
  const std::string out_dir = (fs::path(opt.out) / "outputs" / "benchmark").string();

  if (opt.method == "generator") {
    if (opt.generator_ckpt.empty()) throw std::runtime_error("generator attack needs --generator");
    const nets::Generator<float> gen = ckpt::load_generator(opt.generator_ckpt);
    if (!opt.region_masks.empty()) {
      // region-targeted attack on authentic images: make real content look spliced
      Rng rng(cfg.seed);
      fs::create_directories(fs::path(out_dir) / "images");
      fs::create_directories(fs::path(out_dir) / "masks");
      std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl");
      for (std::size_t i = 0; i < bench.authentic.size(); ++i) {
        Rng r = rng.derive(i);
        const Mask mask = synthcam::random_mask(bench.authentic[i].height,
                                                bench.authentic[i].width, r, 0.15, 0.35);
        const RgbImage attacked = attack::generate_region(gen, bench.authentic[i], mask);
        std::ostringstream name;
        name << "region_" << std::setw(4) << std::setfill('0') << i << ".atk.png";
        save_image(attacked, (fs::path(out_dir) / "images" / name.str()).string());
        save_mask(mask, (fs::path(out_dir) / "masks" / name.str()).string());
        manifest << json{{"kind", "spliced"},
                         {"image", "images/" + name.str()},
                         {"mask", "masks/" + name.str()},
                         {"host_profile", -1},
                         {"donor_profile", -1}}
                        .dump()
                 << "\n";
      }
      std::cout << "region-attacked " << bench.authentic.size() << " images -> " << out_dir << "\n";
      return 0;
    }
    for (auto& s : bench.spliced) {
      s.image = attack::deploy(gen, s.image, opt.tile);
    }
    synthcam::save_benchmark(bench, out_dir);
    std::cout << "attacked " << bench.spliced.size() << " spliced images -> " << out_dir << "\n";
    return 0;
  }

  if (opt.siamese_ckpt.empty()) throw std::runtime_error("baseline attacks need --siamese");
  const nets::Siamese<float> net = ckpt::load_siamese(opt.siamese_ckpt);
  const int sampling = opt.sampling_patches.value_or(cfg.analysis_sampling_patches);

  if (opt.method == "lots") {
    for (auto& s : bench.spliced) {
      baselines::LotsConfig lcfg;
      lcfg.attack_grid = forensics::AnalysisBlockGrid::build(s.image.height, s.image.width,
                                                             kPatchSize, sampling);
      lcfg.use_mask = opt.lots_use_mask;
      s.image = baselines::lots_attack(net, s.image, lcfg, &s.mask);
    }
    synthcam::save_benchmark(bench, out_dir);
    std::cout << "lots-attacked " << bench.spliced.size() << " images -> " << out_dir << "\n";
    return 0;
  }

  const baselines::Method method = baselines::method_from_string(opt.method);
  const baselines::EndToEndAttackConfig acfg = baselines::default_endtoend_config(method);
  for (auto& s : bench.spliced) {
    const auto grid =
        forensics::AnalysisBlockGrid::build(s.image.height, s.image.width, kPatchSize, sampling);
    const auto blocks = forensics::sample_grid(s.image, grid);
    s.image = baselines::attack_image_endtoend(net, s.image, blocks.front(), grid, acfg);
  }
  synthcam::save_benchmark(bench, out_dir);
  std::cout << opt.method << "-attacked " << bench.spliced.size() << " images -> " << out_dir
            << "\n";
  return 0;
}

int cmd_analyze(const AnalyzeOptions& opt) {
  runcfg::RunConfig cfg = resolve_config(opt.config_file, std::nullopt);
  runcfg::init_run_dir(opt.out, cfg);
  const synthcam::SpliceBenchmark bench = synthcam::load_benchmark(opt.images);
  const nets::Siamese<float> net = ckpt::load_siamese(opt.siamese_ckpt);
  const int sampling = opt.sampling_patches.value_or(cfg.analysis_sampling_patches);
  const evalrun::Detector det = evalrun::detector_from_string(opt.detector);

  json entry{{"strategy", opt.tag_strategy},
             {"method", opt.detector},
             {"dataset", opt.tag_dataset},
             {"task", opt.task},
             {"sampling_patches", sampling}};

  if (opt.task == "detect") {
    std::vector<RgbImage> spliced;
    for (const auto& s : bench.spliced) spliced.push_back(s.image);
    const evalrun::DetectionEval ev =
        evalrun::evaluate_detection(det, net, spliced, bench.authentic, sampling);
    runcfg::CsvWriter csv((fs::path(opt.out) / "outputs" / "scores.csv").string(),
                          {"image_index", "is_spliced", "score"});
    for (std::size_t i = 0; i < ev.spliced_scores.size(); ++i) {
      csv.row({static_cast<double>(i), 1.0, ev.spliced_scores[i]});
    }
    for (std::size_t i = 0; i < ev.authentic_scores.size(); ++i) {
      csv.row({static_cast<double>(i), 0.0, ev.authentic_scores[i]});
    }
    entry["map"] = ev.map;
    write_report(opt.out, json::array({entry}));
    std::cout << opt.detector << " detection mAP " << ev.map << "\n";
    return 0;
  }

  if (opt.task != "localize") throw std::runtime_error("unknown analyze task: " + opt.task);
  std::vector<RgbImage> images;
  std::vector<Mask> masks;
  for (const auto& s : bench.spliced) {
    images.push_back(s.image);
    masks.push_back(s.mask);
  }
  const evalrun::LocalizationEval ev =
      evalrun::evaluate_localization(det, net, images, masks, sampling);
  runcfg::CsvWriter csv((fs::path(opt.out) / "outputs" / "scores.csv").string(),
                        {"image_index", "best_f1", "best_mcc"});
  const fs::path heat_dir = fs::path(opt.out) / "outputs" / "heatmaps";
  fs::create_directories(heat_dir);
  for (std::size_t i = 0; i < images.size(); ++i) {
    csv.row({static_cast<double>(i), ev.f1[i], ev.mcc[i]});
    // persist one heatmap in ten for inspection
    if (i % 10 == 0) {
      const auto grid = forensics::AnalysisBlockGrid::build(images[i].height, images[i].width,
                                                            kPatchSize, sampling);
      const auto aff = forensics::analyze_image(net, images[i], grid);
      const auto h = det == evalrun::Detector::fsg
                         ? forensics::localize_fsg(aff, images[i].height, images[i].width)
                         : forensics::localize_exif(aff, images[i].height, images[i].width);
      std::ostringstream name;
      name << "heatmap_" << std::setw(4) << std::setfill('0') << i << ".png";
      save_gray(h.values, h.height, h.width, (heat_dir / name.str()).string());
    }
  }
  entry["f1"] = ev.mean_f1;
  entry["mcc"] = ev.mean_mcc;
  write_report(opt.out, json::array({entry}));
  std::cout << opt.detector << " localization F1 " << ev.mean_f1 << " MCC " << ev.mean_mcc << "\n";
  return 0;
}

int cmd_report(const ReportOptions& opt) {
  fs::create_directories(opt.out);
  json merged = json::array();
  for (const std::string& run : opt.runs) {
    const fs::path p = fs::path(run) / "report.json";
    if (!fs::exists(p)) {
      std::cerr << "report: skipping " << run << " (no report.json)\n";
      continue;
    }
    std::ifstream is(p);
    json j;
    is >> j;
    if (j.is_array()) {
      for (auto& e : j) merged.push_back(e);
    } else {
      merged.push_back(j);
    }
  }
  {
    std::ofstream os(fs::path(opt.out) / "summary.json");
    os << merged.dump(2) << "\n";
  }

  // text grids: one table per (dataset, method, task), strategies as rows
  std::map<std::string, std::map<std::string, json>> tables;
  for (const auto& e : merged) {
    if (!e.contains("strategy")) continue;
    const std::string key = e.value("dataset", "-") + " / " + e.value("method", "-") + " / " +
                            e.value("task", "-");
    tables[key][e.value("strategy", "-")] = e;
  }
  std::ostringstream text;
  for (const auto& [key, rows] : tables) {
    text << "== " << key << " ==\n";
    text << std::left << std::setw(26) << "strategy";
    static const char* cols[] = {"fmr", "sar", "m_psnr", "m_ssim", "map", "f1", "mcc"};
    std::vector<std::string> present;
    for (const char* c : cols) {
      for (const auto& [_, e] : rows) {
        if (e.contains(c)) {
          present.push_back(c);
          break;
        }
      }
    }
    for (const auto& c : present) text << std::right << std::setw(10) << c;
    text << "\n";
    for (const auto& [strategy, e] : rows) {
      text << std::left << std::setw(26) << strategy;
      for (const auto& c : present) {
        if (e.contains(c)) {
          text << std::right << std::setw(10) << std::fixed << std::setprecision(3)
               << e[c].get<double>();
        } else {
          text << std::right << std::setw(10) << "-";
        }
      }
      text << "\n";
    }
    text << "\n";
  }
  {
    std::ofstream os(fs::path(opt.out) / "tables.txt");
    os << text.str();
  }
  std::cout << text.str();
  return 0;
}

}  // namespace traceforge::cli
