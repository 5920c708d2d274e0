#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "mlskelm/error.hpp"
#include "mlskelm/tune.hpp"

using namespace mlskelm;

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Blobs blobs(int perClass, double separation, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  Blobs b{Eigen::MatrixXd(2 * perClass, 2), {}};
  for (int i = 0; i < 2 * perClass; ++i) {
    const int cls = i < perClass ? 1 : 2;
    b.x(i, 0) = n01(gen) * 0.3 + (cls == 1 ? 0.0 : separation);
    b.x(i, 1) = n01(gen) * 0.3;
    b.y.push_back(cls);
  }
  return b;
}

// Held-out MSE using the public train / predict path, one fold assignment given.
double cv_mse_reference(const Blobs& b, const std::vector<int>& fold, std::size_t folds, double C, double gamma) {
  double total = 0.0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> tr, va;
    for (std::size_t i = 0; i < b.y.size(); ++i) (fold[i] == static_cast<int>(f) ? va : tr).push_back(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(tr.size()), 2), xv(static_cast<Eigen::Index>(va.size()), 2);
    std::vector<int> yt, yv;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      xt.row(static_cast<Eigen::Index>(k)) = b.x.row(tr[k]);
      yt.push_back(b.y[static_cast<std::size_t>(tr[k])]);
    }
    for (std::size_t k = 0; k < va.size(); ++k) {
      xv.row(static_cast<Eigen::Index>(k)) = b.x.row(va[k]);
      yv.push_back(b.y[static_cast<std::size_t>(va[k])]);
    }
    const auto model = train(xt, yt, {C, gamma}, 2);
    total += mse_fitness(predict(model, xv).scores, one_hot(yv, model.classIds));
  }
  return total / static_cast<double>(folds);
}

}  // namespace

TEST_SUITE("tune") {

TEST_CASE("stratified folds are balanced per class and seeded") {
  std::vector<int> labels;
  for (int i = 0; i < 23; ++i) labels.push_back(1);
  for (int i = 0; i < 11; ++i) labels.push_back(2);
  const auto f = stratified_folds(labels, 5, 3);
  std::map<std::pair<int, int>, int> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) ++counts[{labels[i], f[i]}];
  for (int fold = 0; fold < 5; ++fold) {
    CHECK(counts[{1, fold}] >= 4);
    CHECK(counts[{1, fold}] <= 5);
    CHECK(counts[{2, fold}] >= 2);
    CHECK(counts[{2, fold}] <= 3);
  }
  CHECK(stratified_folds(labels, 5, 3) == f);
  CHECK(stratified_folds(labels, 5, 4) != f);
  CHECK_THROWS_AS(stratified_folds(labels, 0, 1), ConfigError);
}

TEST_CASE("usable fold count") {
  const std::vector<int> y{1, 1, 1, 2, 2, 3, 3, 3, 3};
  CHECK(usable_folds(y, 5) == 2);
  CHECK(usable_folds(y, 1) == 1);
  const std::vector<int> single{1, 2};
  CHECK(usable_folds(single, 5) == 1);
}

TEST_CASE("cross-validated objective matches train/predict on the same folds") {
  const auto b = blobs(12, 1.0, 5);
  const auto obj = kelm_cv_objective(b.x, b.y, 3, 77);
  const auto fold = stratified_folds(b.y, 3, 77);
  for (const auto& [lc, lg] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {2.0, -1.0}, {-1.0, 1.0}}) {
    const std::vector<double> p{lc, lg};
    const double ref = cv_mse_reference(b, fold, 3, std::pow(10.0, lc), std::pow(10.0, lg));
    CHECK(obj.evaluate(p) == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("one fold is the training-set MSE") {
  const auto b = blobs(10, 1.5, 6);
  const auto obj = kelm_cv_objective(b.x, b.y, 1, 0);
  const std::vector<double> p{1.0, 0.0};
  const auto model = train(b.x, b.y, {10.0, 1.0});
  const double ref = mse_fitness(predict(model, b.x).scores, one_hot(b.y, model.classIds));
  CHECK(obj.evaluate(p) == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("separable blobs tune to a low held-out MSE that a grid confirms") {
  const auto b = blobs(20, 4.0, 8);
  SsaConfig cfg = default_tune_config();
  cfg.seed = 1;
  cfg.maxIter = 10;
  const auto r = tune_kelm(b.x, b.y, cfg, 5);
  CHECK(r.folds == 5);
  CHECK(r.warnings.empty());
  CHECK(r.fitness < 0.05);
  CHECK(r.hyper.C >= 0.01 - 1e-12);
  CHECK(r.hyper.C <= 1e4 + 1e-6);
  CHECK(r.trace.size() == 10);

  const auto obj = kelm_cv_objective(b.x, b.y, 5, derive_seed(1, 0xf01d5ULL));
  double gridBest = 1e9;
  for (double lc = -2.0; lc <= 4.0; lc += 0.5)
    for (double lg = -3.0; lg <= 3.0; lg += 0.5) {
      const std::vector<double> p{lc, lg};
      gridBest = std::min(gridBest, obj.evaluate(p));
    }
  CHECK(gridBest < 0.05);
  const std::vector<double> found{std::log10(r.hyper.C), std::log10(r.hyper.gamma)};
  CHECK(obj.evaluate(found) == doctest::Approx(r.fitness).epsilon(1e-9));
}

TEST_CASE("degenerate bounds return exactly that point") {
  const auto b = blobs(6, 2.0, 2);
  SsaConfig cfg;
  cfg.lower = {1.0, -0.5};
  cfg.upper = {1.0, -0.5};
  cfg.maxIter = 2;
  const auto r = tune_kelm(b.x, b.y, cfg, 2);
  CHECK(r.hyper.C == std::pow(10.0, 1.0));
  CHECK(r.hyper.gamma == std::pow(10.0, -0.5));
}

TEST_CASE("a class smaller than the fold count reduces folds with a warning") {
  auto b = blobs(8, 2.0, 3);
  b.y[0] = 3;
  b.y[1] = 3;  // class 3 has two samples
  SsaConfig cfg;
  cfg.maxIter = 2;
  const auto r = tune_kelm(b.x, b.y, cfg, 5);
  CHECK(r.folds == 2);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("reduced folds from 5 to 2") != std::string::npos);
}

TEST_CASE("tuning rejects bad shapes") {
  const auto b = blobs(4, 2.0, 3);
  SsaConfig cfg;
  cfg.lower = {0.0};
  cfg.upper = {1.0};
  CHECK_THROWS_AS(tune_kelm(b.x, b.y, cfg, 2), ConfigError);
  const std::vector<int> shortLabels{1, 2};
  CHECK_THROWS_AS(kelm_cv_objective(b.x, shortLabels, 2, 0), DataError);
}

}  // TEST_SUITE
