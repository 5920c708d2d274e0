#include <algorithm>
#include <cmath>

#include "mlskelm/error.hpp"
#include "mlskelm/ssa.hpp"
#include "parallel.hpp"

namespace mlskelm {

OptimizeResult optimize_pso(const Objective& obj, const PsoConfig& cfg) {
  if (cfg.popSize < 1 || cfg.maxIter < 1) throw ConfigError("PSO needs popSize, maxIter >= 1");
  if (cfg.lower.size() != cfg.upper.size() || cfg.lower.size() != obj.arity) {
    throw ConfigError("PSO bounds do not match objective arity");
  }
  const auto n = static_cast<Eigen::Index>(cfg.popSize);
  const auto d = static_cast<Eigen::Index>(cfg.lower.size());
  const Eigen::Map<const Eigen::VectorXd> lo(cfg.lower.data(), d), hi(cfg.upper.data(), d);
  const Eigen::VectorXd vmax = cfg.velocityFraction * (hi - lo);

  Eigen::MatrixXd x(n, d), v(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, 0x9050, 0, static_cast<std::uint64_t>(i)));
    for (Eigen::Index e = 0; e < d; ++e) {
      x(i, e) = rng.uniform(lo[e], hi[e]);
      v(i, e) = rng.uniform(-vmax[e], vmax[e]);
    }
  }

  std::vector<double> fit(static_cast<std::size_t>(n));
  const auto evaluate_all = [&] {
    detail::parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
      const Eigen::VectorXd xi = x.row(static_cast<Eigen::Index>(i)).transpose();
      const double f = obj.evaluate({xi.data(), static_cast<std::size_t>(d)});
      if (std::isnan(f)) throw NumericalError("objective returned NaN");
      fit[i] = f;
    });
  };

  evaluate_all();
  Eigen::MatrixXd pbest = x;
  Eigen::VectorXd pbestFit = Eigen::Map<const Eigen::VectorXd>(fit.data(), n);
  Eigen::Index g = 0;
  pbestFit.minCoeff(&g);
  Eigen::VectorXd gbest = pbest.row(g).transpose();
  double gbestFit = pbestFit[g];

  OptimizeResult result;
  result.evaluations = cfg.popSize;
  for (std::size_t t = 1; t <= cfg.maxIter; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Rng rng(derive_seed(cfg.seed, 0x9050, t, static_cast<std::uint64_t>(i)));
      for (Eigen::Index e = 0; e < d; ++e) {
        const double r1 = rng.uniform(), r2 = rng.uniform();
        double vel = cfg.inertia * v(i, e) + cfg.cognitive * r1 * (pbest(i, e) - x(i, e)) +
                     cfg.social * r2 * (gbest[e] - x(i, e));
        vel = std::clamp(vel, -vmax[e], vmax[e]);
        v(i, e) = vel;
        x(i, e) = std::clamp(x(i, e) + vel, lo[e], hi[e]);
      }
    }
    evaluate_all();
    result.evaluations += cfg.popSize;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (fit[static_cast<std::size_t>(i)] < pbestFit[i]) {
        pbestFit[i] = fit[static_cast<std::size_t>(i)];
        pbest.row(i) = x.row(i);
      }
      if (pbestFit[i] < gbestFit) {
        gbestFit = pbestFit[i];
        gbest = pbest.row(i).transpose();
      }
    }
    result.trace.push_back({t, gbestFit, pbestFit.mean()});
  }
  result.bestPos = gbest;
  result.bestFit = gbestFit;
  return result;
}

}  // namespace mlskelm
