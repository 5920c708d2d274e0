#include "mlskelm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>
#include <type_traits>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "mlskelm/error.hpp"
#include "mlskelm/metrics.hpp"
#include "mlskelm/rng.hpp"
#include "mlskelm/tune.hpp"

namespace mlskelm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs one stage, records its wall time and prefixes errors with the stage name.
class StageRunner {
 public:
  template <typename Fn>
  auto operator()(const char* name, Fn&& fn) {
    const auto start = Clock::now();
    try {
      if constexpr (std::is_void_v<std::invoke_result_t<Fn>>) {
        fn();
        times.emplace_back(name, seconds_since(start));
      } else {
        auto result = fn();
        times.emplace_back(name, seconds_since(start));
        return result;
      }
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(name) + ": " + e.what());
    }
  }

  std::vector<std::pair<std::string, double>> times;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

RtvParams rtv_from_json(const json& j) {
  check_keys(j, {"lambda", "sigma", "iterations", "epsilonS", "epsilonL"}, "mstv.scales[]");
  RtvParams p;
  read_opt(j, "lambda", p.lambda);
  read_opt(j, "sigma", p.sigma);
  read_opt(j, "iterations", p.iterations);
  read_opt(j, "epsilonS", p.epsilonS);
  read_opt(j, "epsilonL", p.epsilonL);
  return p;
}

json rtv_to_json(const RtvParams& p) {
  return {{"lambda", p.lambda},
          {"sigma", p.sigma},
          {"iterations", p.iterations},
          {"epsilonS", p.epsilonS},
          {"epsilonL", p.epsilonL}};
}

struct Features {
  HyperCube reduced;
  FeatureMatrix spectral;
  FeatureMatrix spatial;
};

}  // namespace

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  if (!(trainFraction > 0.0 && trainFraction < 1.0)) {
    throw ConfigError("empty test split: trainFraction must lie in (0, 1), got " +
                      std::to_string(trainFraction));
  }
  if (folds < 1) throw ConfigError("folds must be >= 1");
  lbp.validate();
  for (const auto& s : mstv.scales) s.validate();
  if (fixedHyperparams) fixedHyperparams->validate();
}

PipelineConfig config_from_json(const json& j) {
  check_keys(j,
             {"cube", "labels", "numClasses", "mstv", "lbp", "ssa", "trainFraction", "folds", "seed",
              "outputDir", "fixedHyperparams", "canonical"},
             "config");
  PipelineConfig cfg;
  std::string path;
  if (j.contains("cube")) cfg.cubePath = j.at("cube").get<std::string>();
  if (j.contains("labels")) cfg.labelPath = j.at("labels").get<std::string>();
  if (j.contains("outputDir")) cfg.outputDir = j.at("outputDir").get<std::string>();
  read_opt(j, "numClasses", cfg.numClasses);
  read_opt(j, "trainFraction", cfg.trainFraction);
  read_opt(j, "folds", cfg.folds);
  read_opt(j, "seed", cfg.seed);
  read_opt(j, "canonical", cfg.canonical);

  if (j.contains("mstv")) {
    const auto& m = j.at("mstv");
    check_keys(m, {"reducedBands", "scales", "nComponents", "kpcaGamma", "landmarkCount"}, "mstv");
    read_opt(m, "reducedBands", cfg.mstv.reducedBands);
    read_opt(m, "nComponents", cfg.mstv.nComponents);
    read_opt(m, "landmarkCount", cfg.mstv.landmarkCount);
    if (m.contains("kpcaGamma") && !m.at("kpcaGamma").is_null()) {
      cfg.mstv.kpcaGamma = m.at("kpcaGamma").get<double>();
    }
    if (m.contains("scales")) {
      cfg.mstv.scales.clear();
      for (const auto& s : m.at("scales")) cfg.mstv.scales.push_back(rtv_from_json(s));
    }
  }
  if (j.contains("lbp")) {
    const auto& l = j.at("lbp");
    check_keys(l, {"neighbors", "radius", "source"}, "lbp");
    read_opt(l, "neighbors", cfg.lbp.neighbors);
    read_opt(l, "radius", cfg.lbp.radius);
    if (l.contains("source")) {
      const auto src = l.at("source").get<std::string>();
      if (src == "reduced") cfg.lbpSource = LbpSource::Reduced;
      else if (src == "smoothed") cfg.lbpSource = LbpSource::Smoothed;
      else throw ConfigError("lbp.source must be 'reduced' or 'smoothed'");
    }
  }
  if (j.contains("ssa")) {
    const auto& s = j.at("ssa");
    check_keys(s,
               {"popSize", "maxIter", "producerRatio", "scoutRatio", "safetyThreshold", "lower", "upper",
                "paperLiteralV"},
               "ssa");
    read_opt(s, "popSize", cfg.ssa.popSize);
    read_opt(s, "maxIter", cfg.ssa.maxIter);
    read_opt(s, "producerRatio", cfg.ssa.producerRatio);
    read_opt(s, "scoutRatio", cfg.ssa.scoutRatio);
    read_opt(s, "safetyThreshold", cfg.ssa.safetyThreshold);
    read_opt(s, "lower", cfg.ssa.lower);
    read_opt(s, "upper", cfg.ssa.upper);
    read_opt(s, "paperLiteralV", cfg.ssa.paperLiteralV);
  }
  if (j.contains("fixedHyperparams") && !j.at("fixedHyperparams").is_null()) {
    const auto& h = j.at("fixedHyperparams");
    check_keys(h, {"C", "gamma"}, "fixedHyperparams");
    KelmHyperparams hp;
    read_opt(h, "C", hp.C);
    read_opt(h, "gamma", hp.gamma);
    cfg.fixedHyperparams = hp;
  }
  return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
  json scales = json::array();
  for (const auto& s : cfg.mstv.scales) scales.push_back(rtv_to_json(s));
  json j = {
      {"cube", cfg.cubePath.string()},
      {"labels", cfg.labelPath.string()},
      {"numClasses", cfg.numClasses},
      {"mstv",
       {{"reducedBands", cfg.mstv.reducedBands},
        {"scales", scales},
        {"nComponents", cfg.mstv.nComponents},
        {"kpcaGamma", cfg.mstv.kpcaGamma ? json(*cfg.mstv.kpcaGamma) : json(nullptr)},
        {"landmarkCount", cfg.mstv.landmarkCount}}},
      {"lbp",
       {{"neighbors", cfg.lbp.neighbors},
        {"radius", cfg.lbp.radius},
        {"source", cfg.lbpSource == LbpSource::Reduced ? "reduced" : "smoothed"}}},
      {"ssa",
       {{"popSize", cfg.ssa.popSize},
        {"maxIter", cfg.ssa.maxIter},
        {"producerRatio", cfg.ssa.producerRatio},
        {"scoutRatio", cfg.ssa.scoutRatio},
        {"safetyThreshold", cfg.ssa.safetyThreshold},
        {"lower", cfg.ssa.lower},
        {"upper", cfg.ssa.upper},
        {"paperLiteralV", cfg.ssa.paperLiteralV}}},
      {"trainFraction", cfg.trainFraction},
      {"folds", cfg.folds},
      {"seed", cfg.seed},
      {"outputDir", cfg.outputDir.string()},
      {"canonical", cfg.canonical},
  };
  j["fixedHyperparams"] = cfg.fixedHyperparams
                              ? json{{"C", cfg.fixedHyperparams->C}, {"gamma", cfg.fixedHyperparams->gamma}}
                              : json(nullptr);
  return j;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  auto cfg = config_from_json(j);
  // Relative data paths resolve against the config file's directory.
  const auto base = path.parent_path();
  if (!cfg.cubePath.empty() && cfg.cubePath.is_relative()) cfg.cubePath = base / cfg.cubePath;
  if (!cfg.labelPath.empty() && cfg.labelPath.is_relative()) cfg.labelPath = base / cfg.labelPath;
  return cfg;
}

json report_to_json(const RunReport& r) {
  json stages = json::object();
  for (const auto& [name, t] : r.perStageTimes) stages[name] = t;
  json j = {
      {"oa", r.oa},
      {"aa", r.aa},
      {"kappa", r.kappa},
      {"trainTime", r.trainTime},
      {"totalTime", r.totalTime},
      {"perStageTimes", stages},
      {"chosenHyperparams", {{"C", r.chosenHyperparams.C}, {"gamma", r.chosenHyperparams.gamma}}},
      {"confusionPath", r.confusionPath},
      {"mapPath", r.mapPath},
      {"seed", r.seed},
      {"trainSamples", r.trainSamples},
      {"testSamples", r.testSamples},
      {"configEcho", r.configEcho},
  };
  if (r.ssaTracePath) j["ssaTracePath"] = *r.ssaTracePath;
  return j;
}

// ---------------------------------------------------------------------------
// Fusion

FeatureMatrix normalize_features(const FeatureMatrix& f) {
  FeatureMatrix out(f.rows(), f.cols());
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    if (f.rows() == 0) break;
    const double lo = f.col(j).minCoeff(), hi = f.col(j).maxCoeff();
    const double range = hi - lo;
    if (range > 0.0) {
      out.col(j) = (f.col(j).array() - lo) / range;
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

FeatureMatrix fuse(const FeatureMatrix& spectral, const FeatureMatrix& spatial) {
  if (spectral.rows() != spatial.rows()) {
    throw DataError("fuse: pixel counts differ (" + std::to_string(spectral.rows()) + " vs " +
                    std::to_string(spatial.rows()) + ")");
  }
  FeatureMatrix out(spectral.rows(), spectral.cols() + spatial.cols());
  out << spectral, spatial;
  return out;
}

namespace {

Features compute_features(const HyperCube& cube, const PipelineConfig& cfg, StageRunner& stage) {
  Features f;
  HyperCube stacked;
  f.spectral = stage("spectral", [&] {
    cfg.mstv.validate(cube.bands());
    f.reduced = group_and_average(cube, cfg.mstv.reducedBands);
    stacked = multiscale_stack(minmax_scale_bands(f.reduced), cfg.mstv.scales);
    MstvConfig capped = cfg.mstv;
    capped.seed = cfg.seed;
    capped.landmarkCount = std::min(cfg.mstv.landmarkCount, stacked.pixels());
    if (capped.landmarkCount < capped.nComponents) {
      throw ConfigError("image has fewer pixels than requested KPCA components");
    }
    return kpca_reduce(stacked, capped);
  });
  f.spatial = stage("spatial", [&] {
    return lbp_features(cfg.lbpSource == LbpSource::Reduced ? f.reduced : stacked, cfg.lbp);
  });
  return f;
}

}  // namespace

FeatureMatrix extract_features(const HyperCube& cube, const PipelineConfig& cfg) {
  StageRunner stage;
  const auto f = compute_features(cube, cfg, stage);
  return fuse(normalize_features(f.spectral), normalize_features(f.spatial));
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& f, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), f.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = f.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<int> select_labels(const LabelRaster& labels, std::span<const std::size_t> pixels) {
  std::vector<int> out(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = labels[pixels[i]];
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end

RunReport run_pipeline(const HyperCube& cube, const LabelRaster& labels, const PipelineConfig& cfg) {
  const auto start = Clock::now();
  StageRunner stage;
  stage("validate", [&] {
    cfg.validate();
    if (labels.height() != cube.height() || labels.width() != cube.width()) {
      throw DataError("label raster does not match cube dimensions");
    }
    labels.require_all_classes();
  });

  const Features feats = compute_features(cube, cfg, stage);
  const FeatureMatrix fused = stage("fusion", [&] {
    return fuse(normalize_features(feats.spectral), normalize_features(feats.spatial));
  });

  const SampleSplit split = stage("split", [&] {
    auto s = stratified_split(labels, cfg.trainFraction, cfg.seed);
    if (s.testIdx.empty()) throw DataError("empty test split");
    return s;
  });
  const Eigen::MatrixXd trainX = select_rows(fused, split.trainIdx);
  const std::vector<int> trainY = select_labels(labels, split.trainIdx);

  RunReport report;
  report.seed = cfg.seed;
  report.trainSamples = split.trainIdx.size();
  report.testSamples = split.testIdx.size();
  report.configEcho = config_to_json(cfg);
  report.configEcho.erase("outputDir");

  std::vector<SsaTraceRow> trace;
  const auto tuneStart = Clock::now();
  if (cfg.fixedHyperparams) {
    report.chosenHyperparams = *cfg.fixedHyperparams;
  } else {
    const auto tuned = stage("tune", [&] {
      SsaConfig ssa = cfg.ssa;
      ssa.seed = cfg.seed;
      return tune_kelm(trainX, trainY, ssa, cfg.folds);
    });
    report.chosenHyperparams = tuned.hyper;
    trace = tuned.trace;
    spdlog::debug("tuned C = {:.6g}, gamma = {:.6g}, cv mse = {:.6g}", tuned.hyper.C, tuned.hyper.gamma,
                 tuned.fitness);
  }
  const KelmModel model = stage("train", [&] {
    return train(trainX, trainY, report.chosenHyperparams, labels.num_classes());
  });
  report.trainTime = seconds_since(tuneStart);

  // Every labeled pixel is classified for the map; metrics use the test pixels only.
  const auto labeled = labels.labeled_pixels();
  const Prediction pred = stage("predict", [&] { return predict(model, select_rows(fused, labeled)); });

  const ConfusionMatrix cm = stage("evaluate", [&] {
    std::vector<std::uint16_t> predicted(labels.pixels(), 0);
    for (std::size_t k = 0; k < labeled.size(); ++k) {
      predicted[labeled[k]] = static_cast<std::uint16_t>(pred.labels[k]);
    }
    std::vector<int> truth, guess;
    for (auto p : split.testIdx) {
      truth.push_back(labels[p]);
      guess.push_back(predicted[p]);
    }
    auto m = confusion(truth, guess, labels.num_classes());
    report.oa = overall_accuracy(m);
    report.aa = average_accuracy(m);
    report.kappa = kappa(m);
    const LabelRaster map(labels.height(), labels.width(), labels.num_classes(), std::move(predicted));
    fs::create_directories(cfg.outputDir);
    render_map(map, default_palette(labels.num_classes()), cfg.outputDir / "map.ppm");
    return m;
  });

  stage("write", [&] {
    write_confusion_csv(cm, cfg.outputDir / "confusion.csv");
    report.confusionPath = "confusion.csv";
    report.mapPath = "map.ppm";
    if (!cfg.fixedHyperparams) {
      write_trace_csv(trace, cfg.outputDir / "ssa_trace.csv");
      report.ssaTracePath = "ssa_trace.csv";
    }
  });

  report.perStageTimes = stage.times;
  report.totalTime = seconds_since(start);
  if (cfg.canonical) {
    report.trainTime = 0.0;
    report.totalTime = 0.0;
    for (auto& [name, t] : report.perStageTimes) t = 0.0;
  }
  detail::write_file(cfg.outputDir / "report.json", report_to_json(report).dump(2) + "\n");
  return report;
}

RunReport run_full(const PipelineConfig& cfg) {
  const auto start = Clock::now();
  StageRunner stage;
  HyperCube cube = stage("load", [&] {
    if (cfg.cubePath.empty()) throw ConfigError("config has no cube path");
    return load_cube(cfg.cubePath);
  });
  LabelRaster labels = stage("load", [&] {
    if (cfg.labelPath.empty()) throw ConfigError("config has no label path");
    auto raster = cfg.numClasses == 0 ? load_labels_inferred(cfg.labelPath)
                                      : load_labels(cfg.labelPath, cfg.numClasses);
    if (raster.height() != cube.height() || raster.width() != cube.width()) {
      throw DataError("label raster does not match cube dimensions");
    }
    return raster;
  });
  const double loadTime = seconds_since(start);
  RunReport report = run_pipeline(cube, labels, cfg);
  if (!cfg.canonical) {
    report.perStageTimes.insert(report.perStageTimes.begin(), {"load", loadTime});
    report.totalTime += loadTime;
    detail::write_file(cfg.outputDir / "report.json", report_to_json(report).dump(2) + "\n");
  }
  return report;
}

// ---------------------------------------------------------------------------
// Fixtures and output

std::pair<HyperCube, LabelRaster> make_synthetic_cube(std::size_t height, std::size_t width,
                                                      std::size_t bands, std::size_t numClasses,
                                                      double noiseSigma, std::uint64_t seed) {
  if (height == 0 || width == 0 || bands == 0) throw ConfigError("synthetic cube dims must be positive");
  if (numClasses < 1 || numClasses > height) {
    throw ConfigError("synthetic cube needs 1 <= numClasses <= height");
  }
  if (!(noiseSigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");

  std::vector<std::uint16_t> labels(height * width);
  std::vector<float> values(height * width * bands);
  const double denom = bands > 1 ? static_cast<double>(bands - 1) : 1.0;
  for (std::size_t r = 0; r < height; ++r) {
    const std::size_t cls = r * numClasses / height;  // 0-based
    const std::size_t period = 2 + cls % 3;
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t p = r * width + c;
      labels[p] = static_cast<std::uint16_t>(cls + 1);
      const bool on = ((r / period) + (c / period)) % 2 == 0;
      const double texture = on ? 1.05 : 0.95;
      Rng rng(derive_seed(seed, 0x5717, p));
      for (std::size_t b = 0; b < bands; ++b) {
        const double t = static_cast<double>(b) / denom;
        const double k = static_cast<double>(cls);
        const double signature =
            0.45 + 0.3 * std::sin(std::numbers::pi * (k + 1.0) * t + 0.9 * k) + 0.15 * t * (k - 1.5);
        values[b * height * width + p] = static_cast<float>(signature * texture + noiseSigma * rng.normal());
      }
    }
  }
  return {HyperCube(height, width, bands, std::move(values)),
          LabelRaster(height, width, numClasses, std::move(labels))};
}

std::vector<Rgb> default_palette(std::size_t numClasses) {
  static constexpr Rgb kBase[] = {
      {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},  {245, 130, 48},
      {145, 30, 180},  {70, 240, 240},  {240, 50, 230},  {210, 245, 60}, {250, 190, 212},
      {0, 128, 128},   {220, 190, 255}, {170, 110, 40},  {255, 250, 200}, {128, 0, 0},
      {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},    {128, 128, 128},
  };
  std::vector<Rgb> palette;
  for (std::size_t i = 0; i < numClasses; ++i) {
    if (i < std::size(kBase)) {
      palette.push_back(kBase[i]);
      continue;
    }
    // Beyond the table: walk a 6x6x6 colour lattice, skipping black.
    const std::size_t k = (i - std::size(kBase)) % 215 + 1;
    palette.push_back({static_cast<std::uint8_t>(51 * (k % 6)), static_cast<std::uint8_t>(51 * (k / 6 % 6)),
                       static_cast<std::uint8_t>(51 * (k / 36 % 6))});
  }
  return palette;
}

std::string encode_ppm(const LabelRaster& labels, const std::vector<Rgb>& palette) {
  std::string out = "P6\n" + std::to_string(labels.width()) + " " + std::to_string(labels.height()) + "\n255\n";
  out.reserve(out.size() + labels.pixels() * 3);
  for (auto l : labels.labels()) {
    if (l == 0) {
      out.append(3, '\0');
      continue;
    }
    if (l > palette.size()) throw DataError("palette has no colour for label " + std::to_string(l));
    const auto& rgb = palette[l - 1];
    out.push_back(static_cast<char>(rgb[0]));
    out.push_back(static_cast<char>(rgb[1]));
    out.push_back(static_cast<char>(rgb[2]));
  }
  return out;
}

void render_map(const LabelRaster& labels, const std::vector<Rgb>& palette, const fs::path& path) {
  detail::write_file(path, encode_ppm(labels, palette));
}

}  // namespace mlskelm
