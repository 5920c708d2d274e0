#include <doctest.h>

#include <random>

#include <omp.h>

#include "mlskelm/pipeline.hpp"
#include "mlskelm/serial.hpp"
#include "mlskelm/tune.hpp"

using namespace mlskelm;

namespace {

// Runs fn with the given OpenMP thread count, restoring the previous setting.
template <typename Fn>
auto with_threads(int n, Fn&& fn) {
  const int previous = omp_get_max_threads();
  omp_set_num_threads(n);
  auto result = fn();
  omp_set_num_threads(previous);
  return result;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(gen);
  return m;
}

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("distances match the serial reference exactly, Gram matrix to rounding") {
  const auto a = random_matrix(600, 7, 1), b = random_matrix(300, 7, 2);
  CHECK(squared_distances(a, b) == serial::squared_distances(a, b));
  // vectorized exp vs std::exp
  CHECK((gram_matrix(b, 0.3) - serial::gram_matrix(b, 0.3)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("LBP and RTV stack match the serial reference exactly") {
  const auto [cube, labels] = make_synthetic_cube(40, 30, 12, 3, 0.1, 5);
  CHECK(lbp_features(cube) == serial::lbp_features(cube));
  const auto reduced = minmax_scale_bands(group_and_average(cube, 4));
  CHECK(multiscale_stack(reduced, default_rtv_scales()) == serial::multiscale_stack(reduced, default_rtv_scales()));
}

TEST_CASE("KPCA projection and KELM prediction agree with the serial reference") {
  const auto data = random_matrix(700, 9, 3);
  const auto model = fit_kpca(data, 5, 0.1, 200, 4);
  const auto fast = kpca_project(model, data);
  const auto slow = serial::kpca_project(model, data);
  CHECK((fast - slow).cwiseAbs().maxCoeff() <= 1e-9 * slow.cwiseAbs().maxCoeff());

  const auto x = random_matrix(80, 5, 6);
  std::vector<int> y(80);
  for (int i = 0; i < 80; ++i) y[static_cast<std::size_t>(i)] = 1 + i % 4;
  const auto km = train(x, y, {20.0, 0.4});
  const auto q = random_matrix(550, 5, 7);
  const auto p = predict(km, q);
  const auto r = serial::predict(km, q);
  CHECK((p.scores - r.scores).cwiseAbs().maxCoeff() <= 1e-10 * r.scores.cwiseAbs().maxCoeff());
}

TEST_CASE("results do not depend on the thread count") {
  const auto [cube, labels] = make_synthetic_cube(32, 24, 20, 3, 0.1, 8);
  PipelineConfig cfg;
  cfg.mstv.reducedBands = 5;
  cfg.mstv.nComponents = 5;
  cfg.mstv.landmarkCount = 300;
  const auto f1 = with_threads(1, [&] { return extract_features(cube, cfg); });
  const auto f4 = with_threads(4, [&] { return extract_features(cube, cfg); });
  CHECK(f1 == f4);

  const auto split = stratified_split(labels, 0.15, 2);
  const auto x = select_rows(f1, split.trainIdx);
  const auto y = select_labels(labels, split.trainIdx);
  SsaConfig ssa;
  ssa.popSize = 10;
  ssa.maxIter = 4;
  ssa.seed = 3;
  const auto t1 = with_threads(1, [&] { return tune_kelm(x, y, ssa, 3); });
  const auto t4 = with_threads(4, [&] { return tune_kelm(x, y, ssa, 3); });
  CHECK(t1.hyper.C == t4.hyper.C);
  CHECK(t1.hyper.gamma == t4.hyper.gamma);
  CHECK(trace_csv(t1.trace) == trace_csv(t4.trace));

  const auto m = train(x, y, t1.hyper, 3);
  const auto p1 = with_threads(1, [&] { return predict(m, f1); });
  const auto p4 = with_threads(4, [&] { return predict(m, f1); });
  CHECK(p1.scores == p4.scores);
}

}  // TEST_SUITE
