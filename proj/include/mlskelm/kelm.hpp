#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlskelm/datacube.hpp"

namespace mlskelm {

/// Regularization coefficient C and RBF width gamma, K(a, b) = exp(-gamma |a - b|^2).
/// A width-style parameter s (K = exp(-|a - b|^2 / s^2)) corresponds to gamma = 1 / s^2.
struct KelmHyperparams {
  double C = 1.0;
  double gamma = 1.0;

  void validate() const;
};

/// Trained kernel extreme learning machine. alpha solves (Omega + I/C) alpha = Y,
/// with Omega the RBF Gram matrix of trainX and Y the one-hot targets.
struct KelmModel {
  Eigen::MatrixXd trainX;  // n x d
  Eigen::MatrixXd alpha;   // n x c
  KelmHyperparams hyper;
  std::vector<int> classIds;  // column j of alpha belongs to classIds[j]
};

struct Prediction {
  Eigen::MatrixXd scores;   // m x c
  std::vector<int> labels;  // argmax class id, ties toward the lowest id
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

/// |a_i - b_j|^2 for every row pair; parallel over rows of `a`.
Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// exp(-gamma * d2) elementwise.
Eigen::MatrixXd rbf_from_squared_distances(const Eigen::MatrixXd& d2, double gamma);

/// Omega_ij = rbf_kernel(x_i, x_j).
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, double gamma);

/// n x c matrix with a single 1 per row at the column of that row's class.
Eigen::MatrixXd one_hot(std::span<const int> labels, std::span<const int> classIds);

/// Solves (kernel + I/C) alpha = targets by Cholesky, retrying once with 1e-10 jitter,
/// then refining until ||(kernel + I/C) alpha - targets||_inf <= 1e-8 (1 + ||targets||_inf).
/// Throws NumericalError if the factorization or the residual bound fails.
Eigen::MatrixXd solve_coefficients(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& targets,
                                   double C);

/// numClasses = 0 infers the class list from `labels`; otherwise every class in
/// 1..numClasses must occur.
KelmModel train(const Eigen::MatrixXd& x, std::span<const int> labels, const KelmHyperparams& hyper,
                std::size_t numClasses = 0);

Prediction predict(const KelmModel& model, const Eigen::MatrixXd& x);

/// Argmax per row mapped through classIds; ties go to the lowest class id.
std::vector<int> decide(const Eigen::MatrixXd& scores, std::span<const int> classIds);

/// Mean over all entries of (scores - targets)^2.
double mse_fitness(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& targets);

/// Single-file model: 8-byte magic "MLSKELM1", u64 LE header length, JSON header,
/// then trainX and alpha as row-major little-endian f64 blocks.
void save_model(const KelmModel& model, const std::filesystem::path& path);
KelmModel load_model(const std::filesystem::path& path);

}  // namespace mlskelm
