#pragma once

// Single-threaded reference versions of the parallel kernels. Used by the
// tests to check the OpenMP paths and by the benchmarks as the baseline.

#include <Eigen/Core>

#include "mlskelm/datacube.hpp"
#include "mlskelm/kelm.hpp"
#include "mlskelm/lbp.hpp"
#include "mlskelm/mstv.hpp"

namespace mlskelm::serial {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, double gamma);
HyperCube multiscale_stack(const HyperCube& reduced, const std::vector<RtvParams>& scales);
FeatureMatrix lbp_features(const HyperCube& cube, const LbpConfig& cfg = {});
FeatureMatrix kpca_project(const KpcaModel& model, const Eigen::MatrixXd& data);
Prediction predict(const KelmModel& model, const Eigen::MatrixXd& x);

}  // namespace mlskelm::serial
