#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlskelm/kelm.hpp"
#include "mlskelm/ssa.hpp"

namespace mlskelm {

/// SSA defaults for KELM tuning: search (log10 C, log10 gamma) in [-2, 4] x [-3, 3].
SsaConfig default_tune_config();

/// Fold id in [0, folds) per sample. Each class is shuffled with the seed and dealt
/// round-robin, so every fold receives floor or ceil of n_c / folds samples of class c.
std::vector<int> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed);

/// Largest usable fold count: min(requested, smallest class size), at least 1.
std::size_t usable_folds(std::span<const int> labels, std::size_t requested);

/// Cross-validated KELM fitness over (log10 C, log10 gamma): the mean over folds of
/// the held-out MSE between KELM scores and one-hot targets. With folds = 1 it is
/// the training-set MSE. Pairwise distances are computed once up front.
Objective kelm_cv_objective(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t folds,
                            std::uint64_t seed);

struct TuneResult {
  KelmHyperparams hyper;
  double fitness = 0.0;
  std::vector<SsaTraceRow> trace;
  std::size_t folds = 0;
  std::vector<std::string> warnings;
};

/// Runs SSA on kelm_cv_objective and decodes the best position from log space.
/// Empty bounds in `cfg` are replaced by the defaults; lower == upper is allowed.
TuneResult tune_kelm(const Eigen::MatrixXd& x, std::span<const int> labels, SsaConfig cfg,
                     std::size_t folds);

}  // namespace mlskelm
