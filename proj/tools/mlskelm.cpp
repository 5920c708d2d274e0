// mlskelm command-line front end.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mlskelm/datacube.hpp"
#include "mlskelm/error.hpp"
#include "mlskelm/kelm.hpp"
#include "mlskelm/metrics.hpp"
#include "mlskelm/pipeline.hpp"
#include "mlskelm/tune.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mlskelm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw DataError("cannot write " + path.string());
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  std::fclose(f);
  if (!ok) throw DataError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f) throw DataError("missing file: " + path.string());
  std::string out;
  char buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

// Options shared by every config-driven subcommand.
struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> trainFraction;
  std::optional<std::string> cube;
  std::optional<std::string> labels;
  bool canonical = false;

  void attach(CLI::App* cmd, bool configRequired = true) {
    auto* opt = cmd->add_option("-c,--config", config, "JSON configuration file");
    if (configRequired) opt->required();
    cmd->add_option("--seed", seed, "master seed");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--train-fraction", trainFraction, "per-class training fraction");
    cmd->add_option("--cube", cube, "cube path (overrides config)");
    cmd->add_option("--labels", labels, "label raster path (overrides config)");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = config.empty() ? PipelineConfig{} : load_config(config);
    if (seed) cfg.seed = *seed;
    if (out) cfg.outputDir = *out;
    if (trainFraction) cfg.trainFraction = *trainFraction;
    if (cube) cfg.cubePath = *cube;
    if (labels) cfg.labelPath = *labels;
    if (canonical) cfg.canonical = true;
    cfg.validate();
    return cfg;
  }
};

HyperCube load_input_cube(const PipelineConfig& cfg) {
  if (cfg.cubePath.empty()) throw ConfigError("no cube path given");
  return load_cube(cfg.cubePath);
}

LabelRaster load_input_labels(const PipelineConfig& cfg, const HyperCube& cube) {
  if (cfg.labelPath.empty()) throw ConfigError("no label path given");
  if (cfg.numClasses == 0) {
    auto raster = load_labels_inferred(cfg.labelPath);
    if (raster.height() != cube.height() || raster.width() != cube.width()) {
      throw DataError("label raster does not match cube dimensions");
    }
    return raster;
  }
  return load_labels(cfg.labelPath, cfg.numClasses, cube);
}

json split_to_json(const SampleSplit& s) {
  return {{"fraction", s.fraction}, {"seed", s.seed}, {"trainIdx", s.trainIdx}, {"testIdx", s.testIdx}};
}

SampleSplit split_from_json(const json& j) {
  SampleSplit s;
  try {
    s.fraction = j.at("fraction").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.trainIdx = j.at("trainIdx").get<std::vector<std::size_t>>();
    s.testIdx = j.at("testIdx").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed split file: ") + e.what());
  }
  return s;
}

json metrics_json(const ConfusionMatrix& cm) {
  return {{"oa", overall_accuracy(cm)}, {"aa", average_accuracy(cm)}, {"kappa", kappa(cm)}};
}

// Fused features of the configured cube plus its labels and split.
struct Prepared {
  HyperCube cube;
  LabelRaster labels;
  FeatureMatrix features;
  SampleSplit split;
};

Prepared prepare(const PipelineConfig& cfg) {
  Prepared p;
  p.cube = load_input_cube(cfg);
  p.labels = load_input_labels(cfg, p.cube);
  p.labels.require_all_classes();
  p.features = extract_features(p.cube, cfg);
  p.split = stratified_split(p.labels, cfg.trainFraction, cfg.seed);
  if (p.split.testIdx.empty()) throw DataError("empty test split");
  return p;
}

TuneResult run_tune(const PipelineConfig& cfg, const Prepared& p) {
  const auto x = select_rows(p.features, p.split.trainIdx);
  const auto y = select_labels(p.labels, p.split.trainIdx);
  SsaConfig ssa = cfg.ssa;
  ssa.seed = cfg.seed;
  return tune_kelm(x, y, ssa, cfg.folds);
}

int cmd_synth(std::size_t h, std::size_t w, std::size_t bands, std::size_t classes, double noise,
              std::uint64_t seed, const std::string& cubePath, const std::string& labelPath) {
  auto [cube, labels] = make_synthetic_cube(h, w, bands, classes, noise, seed);
  save_cube(cube, cubePath);
  save_labels(labels, labelPath);
  std::cout << "wrote " << cube_files(cubePath).header.string() << " and "
            << cube_files(labelPath).header.string() << "\n";
  return kExitOk;
}

int cmd_features(const PipelineConfig& cfg, const std::string& outPath) {
  const HyperCube cube = load_input_cube(cfg);
  const FeatureMatrix f = extract_features(cube, cfg);
  save_cube(features_to_cube(f, cube.height(), cube.width()), outPath);
  std::cout << "features " << f.rows() << " x " << f.cols() << " -> " << cube_files(outPath).header.string()
            << "\n";
  return kExitOk;
}

int cmd_tune(const PipelineConfig& cfg) {
  const Prepared p = prepare(cfg);
  const TuneResult r = run_tune(cfg, p);
  fs::create_directories(cfg.outputDir);
  write_trace_csv(r.trace, cfg.outputDir / "ssa_trace.csv");
  const json out = {{"C", r.hyper.C},          {"gamma", r.hyper.gamma}, {"fitness", r.fitness},
                    {"folds", r.folds},        {"warnings", r.warnings}, {"seed", cfg.seed},
                    {"ssaTracePath", "ssa_trace.csv"}};
  write_text(cfg.outputDir / "tune.json", out.dump(2) + "\n");
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

int cmd_train(const PipelineConfig& cfg, std::optional<double> c, std::optional<double> gamma) {
  const Prepared p = prepare(cfg);
  KelmHyperparams hyper;
  if (c && gamma) {
    hyper = {*c, *gamma};
  } else if (c || gamma) {
    throw ConfigError("--C and --gamma must be given together");
  } else if (cfg.fixedHyperparams) {
    hyper = *cfg.fixedHyperparams;
  } else {
    const TuneResult r = run_tune(cfg, p);
    fs::create_directories(cfg.outputDir);
    write_trace_csv(r.trace, cfg.outputDir / "ssa_trace.csv");
    hyper = r.hyper;
  }
  const auto x = select_rows(p.features, p.split.trainIdx);
  const auto y = select_labels(p.labels, p.split.trainIdx);
  const KelmModel model = train(x, y, hyper, p.labels.num_classes());
  fs::create_directories(cfg.outputDir);
  save_model(model, cfg.outputDir / "model.bin");
  write_text(cfg.outputDir / "split.json", split_to_json(p.split).dump() + "\n");
  std::cout << "trained on " << x.rows() << " samples, C = " << hyper.C << ", gamma = " << hyper.gamma
            << " -> " << (cfg.outputDir / "model.bin").string() << "\n";
  return kExitOk;
}

int cmd_predict(const PipelineConfig& cfg, const std::string& modelPath) {
  const HyperCube cube = load_input_cube(cfg);
  const KelmModel model = load_model(modelPath);
  const FeatureMatrix f = extract_features(cube, cfg);
  const Prediction pred = predict(model, f);
  int maxId = 0;
  for (int id : model.classIds) maxId = std::max(maxId, id);
  std::vector<std::uint16_t> labels(pred.labels.begin(), pred.labels.end());
  const LabelRaster map(cube.height(), cube.width(), static_cast<std::size_t>(maxId), std::move(labels));
  fs::create_directories(cfg.outputDir);
  save_labels(map, cfg.outputDir / "prediction");
  render_map(map, default_palette(map.num_classes()), cfg.outputDir / "prediction.ppm");
  std::cout << "predicted " << f.rows() << " pixels -> " << (cfg.outputDir / "prediction.json").string()
            << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& labelPath, const std::string& predPath,
                 const std::optional<std::string>& splitPath, const std::string& outDir) {
  const LabelRaster truth = load_labels_inferred(labelPath);
  const LabelRaster pred = load_labels_inferred(predPath);
  if (truth.height() != pred.height() || truth.width() != pred.width()) {
    throw DataError("prediction and reference rasters differ in size");
  }
  std::vector<std::size_t> pixels;
  if (splitPath) {
    pixels = split_from_json(json::parse(read_text(*splitPath))).testIdx;
  } else {
    pixels = truth.labeled_pixels();
  }
  const std::size_t classes = std::max(truth.num_classes(), pred.num_classes());
  std::vector<int> t, g;
  for (auto px : pixels) {
    if (px >= truth.pixels()) throw DataError("split index outside raster");
    if (truth[px] == 0) continue;
    t.push_back(truth[px]);
    g.push_back(pred[px]);
  }
  const ConfusionMatrix cm = confusion(t, g, classes);
  fs::create_directories(outDir);
  write_confusion_csv(cm, fs::path(outDir) / "confusion.csv");
  const json m = metrics_json(cm);
  write_text(fs::path(outDir) / "metrics.json", m.dump(2) + "\n");
  std::cout << m.dump(2) << "\n";
  return kExitOk;
}

int cmd_run(const PipelineConfig& cfg) {
  const RunReport r = run_full(cfg);
  std::cout << "OA " << r.oa << "  AA " << r.aa << "  Kappa " << r.kappa << "  -> "
            << (cfg.outputDir / "report.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MLS-KELM hyperspectral classification"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  Overrides featuresOpts, tuneOpts, trainOpts, predictOpts, runOpts;
  int code = kExitOk;

  auto* synth = app.add_subcommand("synth", "generate a synthetic striped cube and labels");
  std::size_t h = 64, w = 64, bands = 40, classes = 5;
  double noise = 0.1;
  std::uint64_t synthSeed = 0;
  std::string synthCube = "synthetic_cube", synthLabels = "synthetic_labels";
  synth->add_option("--height", h);
  synth->add_option("--width", w);
  synth->add_option("--bands", bands);
  synth->add_option("--classes", classes);
  synth->add_option("--noise", noise, "Gaussian noise sigma");
  synth->add_option("--seed", synthSeed);
  synth->add_option("--cube", synthCube, "output cube base path");
  synth->add_option("--labels", synthLabels, "output label base path");

  auto* features = app.add_subcommand("features", "compute fused MSTV + LBP features");
  featuresOpts.attach(features, false);
  std::string featuresOut = "features";
  features->add_option("-o,--output", featuresOut, "output base path");

  auto* tune = app.add_subcommand("tune", "SSA search for KELM (C, gamma) on the training split");
  tuneOpts.attach(tune);

  auto* trainCmd = app.add_subcommand("train", "train KELM on the training split");
  trainOpts.attach(trainCmd);
  std::optional<double> trainC, trainGamma;
  trainCmd->add_option("--C", trainC, "regularization coefficient (skips tuning)");
  trainCmd->add_option("--gamma", trainGamma, "RBF width (skips tuning)");

  auto* predictCmd = app.add_subcommand("predict", "classify every pixel of a cube");
  predictOpts.attach(predictCmd, false);
  std::string modelPath;
  predictCmd->add_option("-m,--model", modelPath, "model file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "confusion matrix, OA, AA and kappa");
  std::string evalLabels, evalPred, evalOut = ".";
  std::optional<std::string> evalSplit;
  evaluate->add_option("--labels", evalLabels, "reference label raster")->required();
  evaluate->add_option("--pred", evalPred, "predicted label raster")->required();
  evaluate->add_option("--split", evalSplit, "split.json from train; scores test pixels only");
  evaluate->add_option("--out", evalOut, "output directory");

  auto* run = app.add_subcommand("run", "full pipeline");
  runOpts.attach(run);
  run->add_flag("--canonical", runOpts.canonical, "zero timing fields in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    if (synth->parsed()) {
      code = cmd_synth(h, w, bands, classes, noise, synthSeed, synthCube, synthLabels);
    } else if (features->parsed()) {
      code = cmd_features(featuresOpts.resolve(), featuresOut);
    } else if (tune->parsed()) {
      code = cmd_tune(tuneOpts.resolve());
    } else if (trainCmd->parsed()) {
      code = cmd_train(trainOpts.resolve(), trainC, trainGamma);
    } else if (predictCmd->parsed()) {
      code = cmd_predict(predictOpts.resolve(), modelPath);
    } else if (evaluate->parsed()) {
      code = cmd_evaluate(evalLabels, evalPred, evalSplit, evalOut);
    } else if (run->parsed()) {
      code = cmd_run(runOpts.resolve());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return code;
}
