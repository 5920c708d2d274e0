// Serial reference kernels vs their OpenMP counterparts.

#include <random>

#include <benchmark/benchmark.h>

#include "mlskelm/pipeline.hpp"
#include "mlskelm/serial.hpp"

using namespace mlskelm;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(gen);
  return m;
}

const HyperCube& bench_cube() {
  static const HyperCube cube = minmax_scale_bands(
      group_and_average(make_synthetic_cube(64, 64, 40, 5, 0.1, 0).first, 8));
  return cube;
}

void BM_SquaredDistances_Serial(benchmark::State& state) {
  const auto a = random_matrix(state.range(0), 40, 1), b = random_matrix(1000, 40, 2);
  for (auto _ : state) benchmark::DoNotOptimize(serial::squared_distances(a, b));
}

void BM_SquaredDistances_OpenMP(benchmark::State& state) {
  const auto a = random_matrix(state.range(0), 40, 1), b = random_matrix(1000, 40, 2);
  for (auto _ : state) benchmark::DoNotOptimize(squared_distances(a, b));
}

void BM_Lbp_Serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::lbp_features(bench_cube()));
}

void BM_Lbp_OpenMP(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(lbp_features(bench_cube()));
}

void BM_MultiscaleStack_Serial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(serial::multiscale_stack(bench_cube(), default_rtv_scales()));
}

void BM_MultiscaleStack_OpenMP(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(multiscale_stack(bench_cube(), default_rtv_scales()));
}

void BM_KpcaProject_Serial(benchmark::State& state) {
  const auto data = random_matrix(4096, 60, 3);
  const auto model = fit_kpca(data, 20, 1.0 / 60.0, 1000, 0);
  for (auto _ : state) benchmark::DoNotOptimize(serial::kpca_project(model, data));
}

void BM_KpcaProject_OpenMP(benchmark::State& state) {
  const auto data = random_matrix(4096, 60, 3);
  const auto model = fit_kpca(data, 20, 1.0 / 60.0, 1000, 0);
  for (auto _ : state) benchmark::DoNotOptimize(kpca_project(model, data));
}

KelmModel bench_model() {
  const auto x = random_matrix(410, 40, 4);
  std::vector<int> y(410);
  for (int i = 0; i < 410; ++i) y[static_cast<std::size_t>(i)] = 1 + i % 5;
  return train(x, y, {100.0, 0.05});
}

void BM_Predict_Serial(benchmark::State& state) {
  const auto model = bench_model();
  const auto q = random_matrix(4096, 40, 5);
  for (auto _ : state) benchmark::DoNotOptimize(serial::predict(model, q));
}

void BM_Predict_OpenMP(benchmark::State& state) {
  const auto model = bench_model();
  const auto q = random_matrix(4096, 40, 5);
  for (auto _ : state) benchmark::DoNotOptimize(predict(model, q));
}

}  // namespace

BENCHMARK(BM_SquaredDistances_Serial)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SquaredDistances_OpenMP)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Lbp_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Lbp_OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MultiscaleStack_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MultiscaleStack_OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KpcaProject_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KpcaProject_OpenMP)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Predict_OpenMP)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
