#include <doctest.h>

#include <set>

#include <json.hpp>

#include "mlskelm/error.hpp"
#include "mlskelm/metrics.hpp"
#include "mlskelm/pipeline.hpp"
#include "oracles.hpp"

using namespace mlskelm;
using nlohmann::json;

namespace {

PipelineConfig small_config(const std::filesystem::path& out) {
  PipelineConfig cfg;
  cfg.mstv.reducedBands = 6;
  cfg.mstv.nComponents = 6;
  cfg.mstv.landmarkCount = 200;
  cfg.ssa.popSize = 8;
  cfg.ssa.maxIter = 3;
  cfg.folds = 3;
  cfg.trainFraction = 0.2;
  cfg.seed = 4;
  cfg.outputDir = out;
  return cfg;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("normalize_features") {
  Eigen::MatrixXd f(3, 3);
  f << 2, 5, 0, 4, 5, 0.5, 6, 5, 1;
  const auto n = normalize_features(f);
  CHECK(n(0, 0) == 0.0);
  CHECK(n(1, 0) == 0.5);
  CHECK(n(2, 0) == 1.0);
  CHECK(n.col(1).isZero());
  CHECK(n.col(2) == f.col(2));
}

TEST_CASE("fuse puts the spectral block first") {
  Eigen::MatrixXd s(2, 2), t(2, 3);
  s << 1, 2, 3, 4;
  t << 5, 6, 7, 8, 9, 10;
  const auto f = fuse(s, t);
  CHECK(f.cols() == 5);
  CHECK(f(1, 1) == 4);
  CHECK(f(1, 2) == 8);
  CHECK(fuse(s, Eigen::MatrixXd(2, 0)) == s);
  CHECK_THROWS_AS(fuse(s, Eigen::MatrixXd(3, 1)), DataError);
}

TEST_CASE("feature width with the default config is N + K") {
  const auto [cube, labels] = make_synthetic_cube(24, 20, 40, 3, 0.05, 1);
  const auto f = extract_features(cube, PipelineConfig{});
  CHECK(f.rows() == 480);
  CHECK(f.cols() == 40);
  CHECK(f.minCoeff() >= 0.0);
  CHECK(f.maxCoeff() <= 1.0);
}

TEST_CASE("config JSON") {
  const json j = json::parse(R"({
    "cube": "c", "labels": "l", "seed": 9, "trainFraction": 0.3,
    "mstv": {"reducedBands": 10, "kpcaGamma": 0.5, "scales": [{"lambda": 0.01, "sigma": 2}]},
    "lbp": {"source": "smoothed"},
    "ssa": {"popSize": 12, "lower": [0, 0], "upper": [1, 1]},
    "fixedHyperparams": {"C": 100, "gamma": 0.5}
  })");
  const auto cfg = config_from_json(j);
  CHECK(cfg.seed == 9);
  CHECK(cfg.mstv.reducedBands == 10);
  CHECK(*cfg.mstv.kpcaGamma == 0.5);
  REQUIRE(cfg.mstv.scales.size() == 1);
  CHECK(cfg.mstv.scales[0].sigma == 2.0);
  CHECK(cfg.mstv.scales[0].iterations == 4);
  CHECK(cfg.lbpSource == LbpSource::Smoothed);
  CHECK(cfg.ssa.popSize == 12);
  CHECK(cfg.fixedHyperparams->C == 100.0);
  CHECK(config_to_json(config_from_json(config_to_json(cfg))) == config_to_json(cfg));

  CHECK_THROWS_AS(config_from_json(json::parse(R"({"sed": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"mstv": {"K": 1}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"seed": "x"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"lbp": {"source": "raw"}})")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("synthetic cube") {
  const auto [a, la] = make_synthetic_cube(10, 6, 8, 2, 0.0, 3);
  const auto [b, lb] = make_synthetic_cube(10, 6, 8, 2, 0.0, 3);
  CHECK(a == b);
  CHECK(la == lb);
  CHECK(la.labeled_pixels().size() == 60);
  CHECK(la.at(0, 0) == 1);
  CHECK(la.at(9, 5) == 2);
  CHECK_THROWS_AS(make_synthetic_cube(3, 5, 4, 4, 0.1, 0), ConfigError);

  SUBCASE("noiseless classes are separable by nearest centroid") {
    const auto x = cube_to_features(a);
    Eigen::MatrixXd centroid = Eigen::MatrixXd::Zero(2, 8);
    Eigen::Vector2d count = Eigen::Vector2d::Zero();
    for (Eigen::Index p = 0; p < 60; ++p) {
      centroid.row(la[static_cast<std::size_t>(p)] - 1) += x.row(p);
      count[la[static_cast<std::size_t>(p)] - 1] += 1;
    }
    for (int c = 0; c < 2; ++c) centroid.row(c) /= count[c];
    int correct = 0;
    for (Eigen::Index p = 0; p < 60; ++p) {
      const double d0 = (x.row(p) - centroid.row(0)).squaredNorm();
      const double d1 = (x.row(p) - centroid.row(1)).squaredNorm();
      correct += ((d0 <= d1 ? 1 : 2) == la[static_cast<std::size_t>(p)]);
    }
    CHECK(correct == 60);
  }
  SUBCASE("noise changes with the seed") {
    const auto [c, lc] = make_synthetic_cube(10, 6, 8, 2, 0.1, 4);
    const auto [d, ld] = make_synthetic_cube(10, 6, 8, 2, 0.1, 5);
    CHECK_FALSE(c == d);
  }
}

TEST_CASE("palette and PPM") {
  const auto pal = default_palette(40);
  std::set<Rgb> distinct(pal.begin(), pal.end());
  CHECK(distinct.size() == 40);
  CHECK_FALSE(distinct.contains(Rgb{0, 0, 0}));

  const std::string blank = encode_ppm(LabelRaster(2, 3, 1, std::vector<std::uint16_t>(6, 0)), pal);
  CHECK(blank.substr(0, 11) == "P6\n3 2\n255\n");
  CHECK(blank.size() == 11 + 18);
  CHECK(blank.find_first_not_of('\0', 11) == std::string::npos);

  const std::size_t c = 5;
  std::vector<std::uint16_t> ids{1, 2, 3, 4, 5};
  const std::string row = encode_ppm(LabelRaster(1, c, c, ids), pal);
  std::set<std::string> px;
  const std::size_t head = row.size() - 3 * c;
  for (std::size_t i = 0; i < c; ++i) px.insert(row.substr(head + 3 * i, 3));
  CHECK(px.size() == c);
}

TEST_CASE("run_pipeline artifacts, fixed hyperparameters") {
  oracle::TempDir dir("pipe");
  const auto [cube, labels] = make_synthetic_cube(30, 20, 24, 3, 0.05, 2);
  auto cfg = small_config(dir.path());
  cfg.fixedHyperparams = KelmHyperparams{100.0, 0.5};
  const auto report = run_pipeline(cube, labels, cfg);
  CHECK_FALSE(report.ssaTracePath.has_value());
  CHECK_FALSE(std::filesystem::exists(dir / "ssa_trace.csv"));
  CHECK(report.chosenHyperparams.C == 100.0);
  CHECK(report.trainSamples + report.testSamples == 600);

  const auto cm = read_confusion_csv(dir / report.confusionPath);
  CHECK(cm.total() == report.testSamples);
  CHECK(overall_accuracy(cm) == report.oa);
  CHECK(average_accuracy(cm) == report.aa);
  CHECK(kappa(cm) == report.kappa);

  const json j = json::parse(oracle::slurp(dir / "report.json"));
  CHECK(j.at("oa").get<double>() == report.oa);
  CHECK(j.at("kappa").get<double>() == report.kappa);
  CHECK_FALSE(j.contains("ssaTracePath"));
  CHECK(j.at("configEcho").at("seed") == 4);
  for (const char* stage : {"spectral", "spatial", "fusion", "split", "train", "predict", "evaluate"}) {
    CHECK(j.at("perStageTimes").contains(stage));
  }
  const std::string ppm = oracle::slurp(dir / "map.ppm");
  CHECK(ppm.substr(0, 12) == "P6\n20 30\n255");
  CHECK(report.oa > 0.9);
}

TEST_CASE("run_pipeline with tuning writes the SSA trace") {
  oracle::TempDir dir("pipe");
  const auto [cube, labels] = make_synthetic_cube(24, 16, 24, 3, 0.05, 6);
  const auto cfg = small_config(dir.path());
  const auto report = run_pipeline(cube, labels, cfg);
  REQUIRE(report.ssaTracePath.has_value());
  const std::string trace = oracle::slurp(dir / *report.ssaTracePath);
  CHECK(trace.rfind("iteration,bestFit,meanFit\n", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);
  double total = 0.0;
  for (const auto& [name, t] : report.perStageTimes) {
    CHECK(t > 0.0);
    total += t;
  }
  CHECK(std::abs(total - report.totalTime) <= 0.1 * report.totalTime);
}

TEST_CASE("canonical runs are byte-identical") {
  oracle::TempDir a("pipe"), b("pipe");
  const auto [cube, labels] = make_synthetic_cube(24, 16, 24, 3, 0.05, 7);
  auto cfg = small_config(a.path());
  cfg.canonical = true;
  const auto ra = run_pipeline(cube, labels, cfg);
  cfg.outputDir = b.path();
  const auto rb = run_pipeline(cube, labels, cfg);
  for (const char* f : {"report.json", "confusion.csv", "map.ppm", "ssa_trace.csv"}) {
    CHECK(oracle::slurp(a / f) == oracle::slurp(b / f));
  }
  CHECK(ra.totalTime == 0.0);
  CHECK(oracle::slurp(a / "report.json").find(a.path().string()) == std::string::npos);
}

TEST_CASE("stage errors carry the stage name and keep their category") {
  oracle::TempDir dir("pipe");
  const auto [cube, labels] = make_synthetic_cube(12, 8, 10, 2, 0.05, 1);
  auto cfg = small_config(dir.path());
  cfg.trainFraction = 1.0;
  CHECK_THROWS_WITH_AS(run_pipeline(cube, labels, cfg), doctest::Contains("empty test split"), ConfigError);

  cfg = small_config(dir.path());
  cfg.mstv.reducedBands = 11;
  CHECK_THROWS_WITH_AS(run_pipeline(cube, labels, cfg), doctest::Contains("spectral:"), ConfigError);

  cfg = small_config(dir.path());
  const LabelRaster wrong(4, 4, 1, std::vector<std::uint16_t>(16, 1));
  CHECK_THROWS_AS(run_pipeline(cube, wrong, cfg), DataError);

  cfg = small_config(dir.path());
  cfg.cubePath = dir / "missing";
  cfg.labelPath = dir / "missing_labels";
  CHECK_THROWS_WITH_AS(run_full(cfg), doctest::Contains("load:"), DataError);
}

TEST_CASE("run_full reads canonical files") {
  oracle::TempDir dir("pipe");
  const auto [cube, labels] = make_synthetic_cube(20, 12, 16, 2, 0.05, 3);
  save_cube(cube, dir / "cube");
  save_labels(labels, dir / "labels");
  auto cfg = small_config(dir / "out");
  cfg.cubePath = dir / "cube";
  cfg.labelPath = dir / "labels";
  cfg.fixedHyperparams = KelmHyperparams{10.0, 1.0};
  const auto report = run_full(cfg);
  CHECK(report.perStageTimes.front().first == "load");
  CHECK(std::filesystem::exists(dir / "out" / "report.json"));
}

}  // TEST_SUITE
