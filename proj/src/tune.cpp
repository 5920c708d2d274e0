#include "mlskelm/tune.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>

#include <spdlog/spdlog.h>

#include "mlskelm/error.hpp"
#include "mlskelm/rng.hpp"

namespace mlskelm {

namespace {

constexpr std::uint64_t kFoldStream = 0xf01d5ULL;

struct FoldData {
  Eigen::MatrixXd trainD2;  // train x train
  Eigen::MatrixXd validD2;  // valid x train
  Eigen::MatrixXd trainY;
  Eigen::MatrixXd validY;
};

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows,
                       const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
    }
  }
  return out;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

}  // namespace

SsaConfig default_tune_config() {
  SsaConfig cfg;
  cfg.lower = {-2.0, -3.0};
  cfg.upper = {4.0, 3.0};
  return cfg;
}

std::size_t usable_folds(std::span<const int> labels, std::size_t requested) {
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  std::size_t smallest = labels.size();
  for (const auto& [id, n] : counts) smallest = std::min(smallest, n);
  return std::max<std::size_t>(1, std::min(requested, smallest));
}

std::vector<int> stratified_folds(std::span<const int> labels, std::size_t folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("fold count must be >= 1");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  std::vector<int> fold(labels.size(), 0);
  for (auto& [id, idx] : members) {
    Rng rng(derive_seed(seed, kFoldStream, static_cast<std::uint64_t>(id)));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < idx.size(); ++k) fold[idx[k]] = static_cast<int>(k % folds);
  }
  return fold;
}

Objective kelm_cv_objective(const Eigen::MatrixXd& x, std::span<const int> labels, std::size_t folds,
                            std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw DataError("tuning: feature rows and label count differ");
  }
  if (labels.empty()) throw DataError("tuning: no training samples");
  const std::set<int> ids(labels.begin(), labels.end());
  const std::vector<int> classIds(ids.begin(), ids.end());
  const Eigen::MatrixXd y = one_hot(labels, classIds);
  const Eigen::MatrixXd d2 = squared_distances(x, x);

  auto data = std::make_shared<std::vector<FoldData>>();
  if (folds <= 1) {
    data->push_back({d2, d2, y, y});
  } else {
    const auto assignment = stratified_folds(labels, folds, seed);
    for (std::size_t f = 0; f < folds; ++f) {
      std::vector<Eigen::Index> tr, va;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        (assignment[i] == static_cast<int>(f) ? va : tr).push_back(static_cast<Eigen::Index>(i));
      }
      data->push_back({gather(d2, tr, tr), gather(d2, va, tr), gather_rows(y, tr), gather_rows(y, va)});
    }
  }

  Objective obj;
  obj.arity = 2;
  obj.evaluate = [data](std::span<const double> p) {
    const double c = std::pow(10.0, p[0]);
    const double gamma = std::pow(10.0, p[1]);
    double total = 0.0;
    for (const auto& fold : *data) {
      const Eigen::MatrixXd alpha =
          solve_coefficients(rbf_from_squared_distances(fold.trainD2, gamma), fold.trainY, c);
      const Eigen::MatrixXd scores = rbf_from_squared_distances(fold.validD2, gamma) * alpha;
      total += mse_fitness(scores, fold.validY);
    }
    return total / static_cast<double>(data->size());
  };
  return obj;
}

TuneResult tune_kelm(const Eigen::MatrixXd& x, std::span<const int> labels, SsaConfig cfg,
                     std::size_t folds) {
  if (cfg.lower.empty() && cfg.upper.empty()) {
    const auto defaults = default_tune_config();
    cfg.lower = defaults.lower;
    cfg.upper = defaults.upper;
  }
  if (cfg.dims() != 2) throw ConfigError("KELM tuning searches exactly two dimensions");
  cfg.validate(false);
  if (folds < 1) throw ConfigError("fold count must be >= 1");

  TuneResult result;
  result.folds = usable_folds(labels, folds);
  if (result.folds < folds) {
    result.warnings.push_back("reduced folds from " + std::to_string(folds) + " to " +
                              std::to_string(result.folds) +
                              " so every fold keeps each class in training");
    spdlog::warn("tune_kelm: {}", result.warnings.back());
  }

  const auto obj = kelm_cv_objective(x, labels, result.folds, derive_seed(cfg.seed, kFoldStream));
  const auto opt = optimize(obj, cfg);
  result.hyper = {std::pow(10.0, opt.bestPos[0]), std::pow(10.0, opt.bestPos[1])};
  result.fitness = opt.bestFit;
  result.trace = opt.trace;
  return result;
}

}  // namespace mlskelm
