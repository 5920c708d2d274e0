#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mlskelm/datacube.hpp"
#include "mlskelm/kelm.hpp"
#include "mlskelm/lbp.hpp"
#include "mlskelm/mstv.hpp"
#include "mlskelm/ssa.hpp"

namespace mlskelm {

/// Which cube the spatial (LBP) branch reads.
enum class LbpSource {
  Reduced,   // band-grouped averages, K bands
  Smoothed,  // multiscale RTV stack, K * L bands
};

struct PipelineConfig {
  std::filesystem::path cubePath;
  std::filesystem::path labelPath;
  std::size_t numClasses = 0;  // 0 = largest label in the raster
  MstvConfig mstv;
  LbpConfig lbp;
  LbpSource lbpSource = LbpSource::Reduced;
  SsaConfig ssa;  // empty bounds = tuning defaults
  double trainFraction = 0.1;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::filesystem::path outputDir = "mlskelm_out";
  std::optional<KelmHyperparams> fixedHyperparams;
  /// Zero every timing field so reports are byte-stable.
  bool canonical = false;

  void validate() const;
};

/// JSON <-> config. Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

struct RunReport {
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  double trainTime = 0.0;  // tuning + final training, seconds
  double totalTime = 0.0;
  std::vector<std::pair<std::string, double>> perStageTimes;
  KelmHyperparams chosenHyperparams;
  std::optional<std::string> ssaTracePath;  // relative to outputDir
  std::string confusionPath;
  std::string mapPath;
  std::uint64_t seed = 0;
  std::size_t trainSamples = 0;
  std::size_t testSamples = 0;
  nlohmann::json configEcho;
};

nlohmann::json report_to_json(const RunReport& report);

// ---------------------------------------------------------------------------
// Fusion

/// Per-column min-max scaling to [0, 1]; constant columns become 0.
FeatureMatrix normalize_features(const FeatureMatrix& f);

/// Row-wise concatenation, spectral columns first.
FeatureMatrix fuse(const FeatureMatrix& spectral, const FeatureMatrix& spatial);

/// Spectral (MSTV) and spatial (LBP) branches, each normalized, then fused.
FeatureMatrix extract_features(const HyperCube& cube, const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// End-to-end runs

/// Runs every stage on an in-memory cube and writes report.json, confusion.csv,
/// map.ppm and (when tuning) ssa_trace.csv into cfg.outputDir.
RunReport run_pipeline(const HyperCube& cube, const LabelRaster& labels, const PipelineConfig& cfg);

/// Loads cfg.cubePath / cfg.labelPath, then run_pipeline.
RunReport run_full(const PipelineConfig& cfg);

/// Row subset of a feature matrix.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& f, std::span<const std::size_t> rows);
/// Class ids of the given pixels.
std::vector<int> select_labels(const LabelRaster& labels, std::span<const std::size_t> pixels);

// ---------------------------------------------------------------------------
// Fixtures and output

/// Horizontal class stripes, each with its own smooth spectral signature, a
/// per-class checkerboard texture and i.i.d. Gaussian noise. Every pixel is labeled.
std::pair<HyperCube, LabelRaster> make_synthetic_cube(std::size_t height, std::size_t width,
                                                      std::size_t bands, std::size_t numClasses,
                                                      double noiseSigma, std::uint64_t seed);

using Rgb = std::array<std::uint8_t, 3>;

/// numClasses distinct, non-black colours.
std::vector<Rgb> default_palette(std::size_t numClasses);

/// Binary P6 PPM; label 0 is black, label k uses palette[k - 1].
std::string encode_ppm(const LabelRaster& labels, const std::vector<Rgb>& palette);
void render_map(const LabelRaster& labels, const std::vector<Rgb>& palette,
                const std::filesystem::path& path);

}  // namespace mlskelm
