#include "mlskelm/mstv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "mlskelm/error.hpp"
#include "mlskelm/rng.hpp"
#include "parallel.hpp"

namespace mlskelm {

namespace {

constexpr std::uint64_t kLandmarkStream = 0x6b7063614c4dULL;
constexpr Eigen::Index kProjectBlock = 256;

double sqdist(const Eigen::Ref<const Eigen::RowVectorXd>& a,
              const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

// Kernel between every row of `a` and every row of `b`.
Eigen::MatrixXd kernel_block(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::MatrixXd& b,
                             double gamma) {
  if (gamma == 0.0) return a * b.transpose();
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = std::exp(-gamma * sqdist(a.row(i), b.row(j)));
  }
  return k;
}

}  // namespace

BandGrouping make_band_grouping(std::size_t bands, std::size_t k) {
  if (k < 1) throw ConfigError("band group count K must be >= 1");
  if (k > bands) {
    throw ConfigError("band group count K=" + std::to_string(k) + " exceeds band count " +
                      std::to_string(bands));
  }
  const std::size_t per = bands / k;
  BandGrouping g;
  g.groups.resize(k);
  for (std::size_t group = 0; group < k; ++group) {
    const std::size_t begin = group * per;
    const std::size_t end = group + 1 == k ? bands : begin + per;
    for (std::size_t b = begin; b < end; ++b) g.groups[group].push_back(b);
  }
  return g;
}

HyperCube group_and_average(const HyperCube& cube, std::size_t k) {
  const auto grouping = make_band_grouping(cube.bands(), k);
  HyperCube out(cube.height(), cube.width(), k);
  detail::parallel_for(k, [&](std::size_t g) {
    const auto& members = grouping.groups[g];
    auto dst = out.band(g);
    for (std::size_t p = 0; p < cube.pixels(); ++p) {
      double acc = 0.0;
      for (auto b : members) acc += cube.band(b)[p];
      dst[p] = static_cast<float>(acc / static_cast<double>(members.size()));
    }
  });
  return out;
}

HyperCube minmax_scale_bands(const HyperCube& cube) {
  HyperCube out(cube.height(), cube.width(), cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const auto src = cube.band(b);
    const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
    const double min = *lo, range = static_cast<double>(*hi) - *lo;
    auto dst = out.band(b);
    for (std::size_t p = 0; p < src.size(); ++p) {
      dst[p] = range > 0.0 ? static_cast<float>((src[p] - min) / range) : 0.0f;
    }
  }
  return out;
}

HyperCube multiscale_stack(const HyperCube& reduced, const std::vector<RtvParams>& scales) {
  if (scales.empty()) throw ConfigError("multiscale_stack needs at least one scale");
  for (const auto& s : scales) s.validate();
  const std::size_t k = reduced.bands();
  HyperCube out(reduced.height(), reduced.width(), k * scales.size());
  detail::parallel_for(k * scales.size(), [&](std::size_t job) {
    const std::size_t l = job / k, band = job % k;
    out.set_band(job, rtv_smooth(reduced.band_image(band), scales[l]));
  });
  return out;
}

double MstvConfig::resolved_gamma() const {
  if (kpcaGamma) return *kpcaGamma;
  return 1.0 / static_cast<double>(reducedBands * scales.size());
}

void MstvConfig::validate(std::size_t bands) const {
  if (reducedBands < 1 || reducedBands > bands) {
    throw ConfigError("MSTV K must lie in [1, " + std::to_string(bands) + "]");
  }
  if (scales.empty()) throw ConfigError("MSTV needs at least one RTV scale");
  for (const auto& s : scales) s.validate();
  if (nComponents < 1 || nComponents > reducedBands * scales.size()) {
    throw ConfigError("KPCA component count must lie in [1, K*L]");
  }
  if (landmarkCount < nComponents) throw ConfigError("landmarkCount must be >= nComponents");
  if (kpcaGamma && !(*kpcaGamma >= 0.0)) throw ConfigError("kpcaGamma must be >= 0");
}

KpcaModel fit_kpca(const Eigen::MatrixXd& data, std::size_t nComponents, double gamma,
                   std::size_t landmarkCount, std::uint64_t seed) {
  const auto pixels = static_cast<std::size_t>(data.rows());
  if (nComponents < 1) throw ConfigError("KPCA needs at least one component");
  if (landmarkCount > pixels) {
    throw ConfigError("landmarkCount " + std::to_string(landmarkCount) + " exceeds pixel count " +
                      std::to_string(pixels));
  }
  if (landmarkCount < nComponents) throw ConfigError("landmarkCount must be >= nComponents");
  if (gamma < 0.0) throw ConfigError("KPCA gamma must be >= 0");

  Rng rng(derive_seed(seed, kLandmarkStream));
  auto picks = rng.sample_without_replacement(pixels, landmarkCount);
  std::sort(picks.begin(), picks.end());

  KpcaModel model;
  model.gamma = gamma;
  model.landmarks.resize(static_cast<Eigen::Index>(landmarkCount), data.cols());
  for (std::size_t i = 0; i < picks.size(); ++i) {
    model.landmarks.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(picks[i]));
  }

  const Eigen::MatrixXd k = kernel_block(model.landmarks, model.landmarks, gamma);
  const auto m = static_cast<double>(landmarkCount);
  model.kernelColMeans = k.colwise().mean().transpose();
  model.kernelMean = k.mean();
  Eigen::MatrixXd centered = k;
  centered.rowwise() -= model.kernelColMeans.transpose();
  centered.colwise() -= model.kernelColMeans;
  centered.array() += model.kernelMean;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(centered);
  if (eig.info() != Eigen::Success) throw NumericalError("KPCA eigendecomposition failed");

  const double scale = std::max(k.diagonal().mean(), std::numeric_limits<double>::min());
  const double tol = 1e-12 * m * scale;
  const Eigen::Index total = centered.rows();
  std::size_t positive = 0;
  for (Eigen::Index i = total - 1; i >= 0 && eig.eigenvalues()[i] > tol; --i) ++positive;
  if (positive < nComponents) {
    throw NumericalError("fewer than N positive eigenvalues: requested N = " +
                         std::to_string(nComponents) + ", achievable N = " + std::to_string(positive));
  }

  const auto n = static_cast<Eigen::Index>(nComponents);
  model.eigenvalues.resize(n);
  model.projection.resize(total, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = total - 1 - j;
    const double lambda = eig.eigenvalues()[src];
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v[pivot] < 0) v = -v;
    model.eigenvalues[j] = lambda;
    model.projection.col(j) = v / std::sqrt(lambda);
  }
  return model;
}

FeatureMatrix kpca_project(const KpcaModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.landmarks.cols()) throw DataError("KPCA projection: feature dim mismatch");
  FeatureMatrix out(data.rows(), model.projection.cols());
  const Eigen::Index rows = data.rows();
  const auto blocks = static_cast<std::size_t>((rows + kProjectBlock - 1) / kProjectBlock);
  detail::parallel_for(blocks, [&](std::size_t block) {
    const Eigen::Index begin = static_cast<Eigen::Index>(block) * kProjectBlock;
    const Eigen::Index len = std::min(kProjectBlock, rows - begin);
    Eigen::MatrixXd k = kernel_block(data.middleRows(begin, len), model.landmarks, model.gamma);
    const Eigen::VectorXd rowMeans = k.rowwise().mean();
    k.rowwise() -= model.kernelColMeans.transpose();
    k.colwise() -= rowMeans;
    k.array() += model.kernelMean;
    out.middleRows(begin, len).noalias() = k * model.projection;
  });
  return out;
}

FeatureMatrix kpca_reduce(const HyperCube& stacked, const MstvConfig& cfg) {
  const Eigen::MatrixXd data = cube_to_features(stacked);
  const auto model =
      fit_kpca(data, cfg.nComponents, cfg.resolved_gamma(), cfg.landmarkCount, cfg.seed);
  return kpca_project(model, data);
}

FeatureMatrix mstv_features(const HyperCube& cube, const MstvConfig& cfg) {
  cfg.validate(cube.bands());
  const HyperCube reduced = minmax_scale_bands(group_and_average(cube, cfg.reducedBands));
  const HyperCube stacked = multiscale_stack(reduced, cfg.scales);
  MstvConfig capped = cfg;
  capped.landmarkCount = std::min(cfg.landmarkCount, stacked.pixels());
  if (capped.landmarkCount < capped.nComponents) {
    throw ConfigError("image has fewer pixels than requested KPCA components");
  }
  return kpca_reduce(stacked, capped);
}

}  // namespace mlskelm
