#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mlskelm/datacube.hpp"

namespace mlskelm {

// ---------------------------------------------------------------------------
// Band grouping

/// Contiguous partition of bands 0..M-1 into K groups. The first K-1 groups hold
/// floor(M/K) bands each; the last group takes the remainder.
struct BandGrouping {
  std::vector<std::vector<std::size_t>> groups;

  std::size_t size() const { return groups.size(); }
};

BandGrouping make_band_grouping(std::size_t bands, std::size_t k);

/// K-band cube whose band k is the per-pixel mean of the bands in group k.
HyperCube group_and_average(const HyperCube& cube, std::size_t k);

/// Rescales each band independently to [0, 1]; constant bands map to 0.
HyperCube minmax_scale_bands(const HyperCube& cube);

// ---------------------------------------------------------------------------
// Relative total variation smoothing

struct RtvParams {
  double lambda = 0.005;  // smoothing strength
  double sigma = 3.0;     // window scale, pixels
  int iterations = 4;
  double epsilonS = 1e-2;  // floor on |gradient| in the texture weight
  double epsilonL = 1e-3;  // floor on |windowed gradient| in the structure weight

  void validate() const;
};

/// Structure-preserving smoothing: approximately minimizes
///   sum_p (S_p - I_p)^2 + lambda * sum_p (Dx_p / (Lx_p + eps) + Dy_p / (Ly_p + eps))
/// where D is the windowed total variation and L the windowed inherent variation.
/// Each iteration freezes the weights at the current estimate and solves the sparse
/// SPD system (Id + lambda * L_w) S = I. Throws NumericalError if a solve fails.
Image rtv_smooth(const Image& input, const RtvParams& params);

/// Separable Gaussian blur with replicate borders; kernel radius ceil(3 sigma).
Image gaussian_blur(const Image& input, double sigma);

/// sum over neighbouring pairs of |difference| (anisotropic total variation).
double total_variation(const Image& img);

/// Band (l * K + k) of the output is rtv_smooth(band k, scales[l]). Bands are
/// smoothed in parallel; output is independent of the thread count.
HyperCube multiscale_stack(const HyperCube& reduced, const std::vector<RtvParams>& scales);

/// Default scale schedule: sigma in {1, 2, 3}, lambda = 0.005.
std::vector<RtvParams> default_rtv_scales();

// ---------------------------------------------------------------------------
// Landmark kernel PCA

struct MstvConfig {
  std::size_t reducedBands = 20;  // K
  std::vector<RtvParams> scales = default_rtv_scales();
  std::size_t nComponents = 20;  // N
  /// RBF width for KPCA. Empty means 1 / (K * L); 0 selects the linear kernel.
  std::optional<double> kpcaGamma;
  std::size_t landmarkCount = 1000;
  std::uint64_t seed = 0;

  double resolved_gamma() const;
  void validate(std::size_t bands) const;
};

struct KpcaModel {
  Eigen::MatrixXd landmarks;        // m x D
  Eigen::VectorXd kernelColMeans;   // column means of the uncentered landmark kernel
  double kernelMean = 0.0;          // grand mean of the uncentered landmark kernel
  Eigen::VectorXd eigenvalues;      // top N, descending, strictly positive
  Eigen::MatrixXd projection;       // m x N, eigenvectors scaled by 1/sqrt(eigenvalue)
  double gamma = 0.0;               // 0 = linear
};

/// Fits landmark KPCA on rows of `data`. Throws NumericalError when fewer than
/// nComponents eigenvalues are positive (the message reports the achievable count).
KpcaModel fit_kpca(const Eigen::MatrixXd& data, std::size_t nComponents, double gamma,
                   std::size_t landmarkCount, std::uint64_t seed);

/// Projects every row of `data`; parallel over rows.
FeatureMatrix kpca_project(const KpcaModel& model, const Eigen::MatrixXd& data);

/// Fits on a seeded landmark subset of the stacked cube's pixels and projects all pixels.
FeatureMatrix kpca_reduce(const HyperCube& stacked, const MstvConfig& cfg);

/// Full spectral branch: group_and_average, per-band [0,1] scaling, multiscale RTV
/// stack, KPCA. landmarkCount is capped at the pixel count.
FeatureMatrix mstv_features(const HyperCube& cube, const MstvConfig& cfg);

}  // namespace mlskelm
