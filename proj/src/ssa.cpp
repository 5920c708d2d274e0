#include "mlskelm/ssa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "mlskelm/error.hpp"
#include "parallel.hpp"

namespace mlskelm {

namespace {

enum Stream : std::uint64_t { kInit = 1, kProducer = 2, kJoiner = 3, kScout = 4, kIteration = 5 };

Rng sparrow_rng(const SsaConfig& cfg, Stream role, std::size_t iteration, std::size_t sparrow) {
  return Rng(derive_seed(cfg.seed, role, iteration, sparrow));
}

std::string format_position(std::span<const double> x) {
  std::ostringstream out;
  out.precision(17);
  out << "(";
  for (std::size_t i = 0; i < x.size(); ++i) out << (i ? ", " : "") << x[i];
  out << ")";
  return out.str();
}

}  // namespace

std::size_t SsaConfig::producer_count() const {
  const auto n = static_cast<double>(popSize);
  const auto p = static_cast<std::size_t>(std::llround(producerRatio * n));
  return std::clamp<std::size_t>(p, 1, popSize - 1);
}

std::size_t SsaConfig::scout_count() const {
  const auto s = static_cast<std::size_t>(std::llround(scoutRatio * static_cast<double>(popSize)));
  return std::clamp<std::size_t>(s, 1, popSize);
}

void SsaConfig::validate(bool strictBounds) const {
  if (popSize < 2) throw ConfigError("SSA population size must be >= 2");
  if (maxIter < 1) throw ConfigError("SSA maxIter must be >= 1");
  if (!(producerRatio > 0.0 && producerRatio < 1.0)) throw ConfigError("SSA PD must lie in (0, 1)");
  if (!(scoutRatio > 0.0 && scoutRatio < 1.0)) throw ConfigError("SSA SD must lie in (0, 1)");
  if (!(safetyThreshold > 0.0 && safetyThreshold < 1.0)) {
    throw ConfigError("SSA ST must lie in (0, 1)");
  }
  if (lower.empty() || lower.size() != upper.size()) {
    throw ConfigError("SSA bounds must be non-empty and of equal length");
  }
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw ConfigError("SSA bounds must be finite");
    }
    if (strictBounds ? !(lower[i] < upper[i]) : !(lower[i] <= upper[i])) {
      throw ConfigError("SSA bounds require lower < upper in dimension " + std::to_string(i));
    }
  }
}

std::vector<std::size_t> SsaState::ranking() const {
  std::vector<std::size_t> order(static_cast<std::size_t>(fitness.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  return order;
}

void SsaState::refresh_extremes() {
  Eigen::Index best = 0, worst = 0;
  for (Eigen::Index i = 1; i < fitness.size(); ++i) {
    if (fitness[i] < fitness[best]) best = i;
    if (fitness[i] > fitness[worst]) worst = i;
  }
  if (bestPos.size() == 0 || fitness[best] < bestFit) {
    bestFit = fitness[best];
    bestPos = positions.row(best).transpose();
  }
  worstFit = fitness[worst];
  worstPos = positions.row(worst).transpose();
}

double producer_safe_step(double x, std::size_t rank, double alpha, std::size_t maxIter) {
  return x * std::exp(-static_cast<double>(rank) / (alpha * static_cast<double>(maxIter)));
}

double producer_alarm_step(double x, double q) { return x + q; }

double joiner_starving_step(double x, double worst, std::size_t rank, double q) {
  const auto r = static_cast<double>(rank);
  return q * std::exp((worst - x) / (r * r));
}

void joiner_follow_step(std::span<const double> x, std::span<const double> followBest,
                        std::span<const double> signs, std::span<double> out) {
  double shift = 0.0;
  for (std::size_t e = 0; e < x.size(); ++e) shift += std::abs(x[e] - followBest[e]) * signs[e];
  shift /= static_cast<double>(x.size());
  for (std::size_t e = 0; e < x.size(); ++e) out[e] = followBest[e] + shift;
}

double scout_flee_step(double x, double best, double v) { return best + v * std::abs(x - best); }

double scout_edge_step(double x, double worst, double fc, double fw, double o) {
  return x + o * (std::abs(x - worst) / ((fc - fw) + kScoutDelta));
}

void clamp_to_bounds(std::span<double> x, const SsaConfig& cfg, std::span<const double> fallback) {
  for (std::size_t e = 0; e < x.size(); ++e) {
    if (std::isnan(x[e])) x[e] = fallback[e];
    x[e] = std::clamp(x[e], cfg.lower[e], cfg.upper[e]);
  }
}

IterationDraws draw_iteration(const SsaConfig& cfg, std::size_t iteration) {
  Rng rng = sparrow_rng(cfg, kIteration, iteration, 0);
  IterationDraws draws;
  draws.alarm = rng.uniform();
  draws.scouts = rng.sample_without_replacement(cfg.popSize, cfg.scout_count());
  return draws;
}

Candidates update_producers(const SsaState& state, const SsaConfig& cfg, const IterationDraws& draws) {
  const auto order = state.ranking();
  const std::size_t producers = cfg.producer_count();
  const auto d = static_cast<Eigen::Index>(cfg.dims());
  Candidates out{{}, Eigen::MatrixXd(static_cast<Eigen::Index>(producers), d)};
  for (std::size_t r = 0; r < producers; ++r) {
    const std::size_t i = order[r];
    Rng rng = sparrow_rng(cfg, kProducer, state.iteration + 1, i);
    Eigen::VectorXd x = state.positions.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd old = x;
    if (draws.alarm < cfg.safetyThreshold) {
      const double alpha = rng.uniform();
      for (Eigen::Index e = 0; e < d; ++e) x[e] = producer_safe_step(x[e], r + 1, alpha, cfg.maxIter);
    } else {
      const double q = rng.normal();
      for (Eigen::Index e = 0; e < d; ++e) x[e] = producer_alarm_step(x[e], q);
    }
    clamp_to_bounds({x.data(), static_cast<std::size_t>(d)}, cfg, {old.data(), static_cast<std::size_t>(d)});
    out.sparrows.push_back(i);
    out.positions.row(static_cast<Eigen::Index>(r)) = x.transpose();
  }
  return out;
}

Candidates update_joiners(const SsaState& state, const SsaConfig& cfg,
                          const Eigen::VectorXd& followBest) {
  const auto order = state.ranking();
  const std::size_t producers = cfg.producer_count();
  const std::size_t n = cfg.popSize;
  const auto d = static_cast<Eigen::Index>(cfg.dims());
  Candidates out{{}, Eigen::MatrixXd(static_cast<Eigen::Index>(n - producers), d)};
  Eigen::VectorXd signs(d);
  for (std::size_t r = producers; r < n; ++r) {
    const std::size_t i = order[r];
    const std::size_t rank = r + 1;
    Rng rng = sparrow_rng(cfg, kJoiner, state.iteration + 1, i);
    const Eigen::VectorXd old = state.positions.row(static_cast<Eigen::Index>(i)).transpose();
    Eigen::VectorXd x(d);
    if (2 * rank > n) {
      const double q = rng.normal();
      for (Eigen::Index e = 0; e < d; ++e) {
        x[e] = joiner_starving_step(old[e], state.worstPos[e], rank, q);
      }
    } else {
      for (Eigen::Index e = 0; e < d; ++e) signs[e] = rng.below(2) ? 1.0 : -1.0;
      joiner_follow_step({old.data(), static_cast<std::size_t>(d)},
                         {followBest.data(), static_cast<std::size_t>(d)},
                         {signs.data(), static_cast<std::size_t>(d)},
                         {x.data(), static_cast<std::size_t>(d)});
    }
    clamp_to_bounds({x.data(), static_cast<std::size_t>(d)}, cfg,
                    {old.data(), static_cast<std::size_t>(d)});
    out.sparrows.push_back(i);
    out.positions.row(static_cast<Eigen::Index>(r - producers)) = x.transpose();
  }
  return out;
}

Candidates update_scouts(const SsaState& state, const SsaConfig& cfg, const IterationDraws& draws) {
  const auto d = static_cast<Eigen::Index>(cfg.dims());
  Candidates out{{}, Eigen::MatrixXd(static_cast<Eigen::Index>(draws.scouts.size()), d)};
  for (std::size_t s = 0; s < draws.scouts.size(); ++s) {
    const std::size_t i = draws.scouts[s];
    Rng rng = sparrow_rng(cfg, kScout, state.iteration + 1, i);
    const Eigen::VectorXd old = state.positions.row(static_cast<Eigen::Index>(i)).transpose();
    const double fc = state.fitness[static_cast<Eigen::Index>(i)];
    Eigen::VectorXd x(d);
    if (fc > state.bestFit) {
      for (Eigen::Index e = 0; e < d; ++e) {
        const double v = cfg.paperLiteralV ? static_cast<double>(rng.below(2)) : rng.normal();
        x[e] = scout_flee_step(old[e], state.bestPos[e], v);
      }
    } else {
      const double o = rng.uniform(-1.0, 1.0);
      for (Eigen::Index e = 0; e < d; ++e) {
        x[e] = scout_edge_step(old[e], state.worstPos[e], fc, state.worstFit, o);
      }
    }
    clamp_to_bounds({x.data(), static_cast<std::size_t>(d)}, cfg,
                    {old.data(), static_cast<std::size_t>(d)});
    out.sparrows.push_back(i);
    out.positions.row(static_cast<Eigen::Index>(s)) = x.transpose();
  }
  return out;
}

std::vector<double> evaluate_candidates(const Candidates& candidates, const Objective& obj) {
  const std::size_t count = candidates.sparrows.size();
  std::vector<double> fit(count);
  const Eigen::Index d = candidates.positions.cols();
  detail::parallel_for(count, [&](std::size_t k) {
    const Eigen::VectorXd x = candidates.positions.row(static_cast<Eigen::Index>(k)).transpose();
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(d));
    const double f = obj.evaluate(xs);
    if (std::isnan(f)) throw NumericalError("objective returned NaN at position " + format_position(xs));
    fit[k] = f;
  });
  return fit;
}

void apply_greedy(SsaState& state, const Candidates& candidates, std::span<const double> fitness) {
  for (std::size_t k = 0; k < candidates.sparrows.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(candidates.sparrows[k]);
    if (fitness[k] < state.fitness[i]) {
      state.fitness[i] = fitness[k];
      state.positions.row(i) = candidates.positions.row(static_cast<Eigen::Index>(k));
    }
  }
}

SsaState initialize(const Objective& obj, const SsaConfig& cfg) {
  if (obj.arity != cfg.dims()) throw ConfigError("objective arity does not match SSA bounds");
  const auto n = static_cast<Eigen::Index>(cfg.popSize);
  const auto d = static_cast<Eigen::Index>(cfg.dims());
  Candidates all{{}, Eigen::MatrixXd(n, d)};
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng rng = sparrow_rng(cfg, kInit, 0, static_cast<std::size_t>(i));
    for (Eigen::Index e = 0; e < d; ++e) {
      all.positions(i, e) = rng.uniform(cfg.lower[static_cast<std::size_t>(e)],
                                        cfg.upper[static_cast<std::size_t>(e)]);
    }
    all.sparrows.push_back(static_cast<std::size_t>(i));
  }
  const auto fit = evaluate_candidates(all, obj);
  SsaState state;
  state.positions = all.positions;
  state.fitness = Eigen::Map<const Eigen::VectorXd>(fit.data(), n);
  state.refresh_extremes();
  return state;
}

void step(SsaState& state, const Objective& obj, const SsaConfig& cfg) {
  const auto draws = draw_iteration(cfg, state.iteration + 1);

  const Candidates producers = update_producers(state, cfg, draws);
  const auto producerFit = evaluate_candidates(producers, obj);
  const auto bestProducer = static_cast<Eigen::Index>(
      std::min_element(producerFit.begin(), producerFit.end()) - producerFit.begin());
  const Eigen::VectorXd followBest = producers.positions.row(bestProducer).transpose();

  const Candidates joiners = update_joiners(state, cfg, followBest);
  const auto joinerFit = evaluate_candidates(joiners, obj);
  const Candidates scouts = update_scouts(state, cfg, draws);
  const auto scoutFit = evaluate_candidates(scouts, obj);

  apply_greedy(state, producers, producerFit);
  apply_greedy(state, joiners, joinerFit);
  apply_greedy(state, scouts, scoutFit);
  state.refresh_extremes();
  ++state.iteration;
}

OptimizeResult optimize(const Objective& obj, const SsaConfig& cfg) {
  cfg.validate(false);
  SsaState state = initialize(obj, cfg);
  OptimizeResult result;
  result.evaluations = cfg.popSize;
  const std::size_t perIteration = cfg.popSize + cfg.scout_count();
  for (std::size_t t = 0; t < cfg.maxIter; ++t) {
    step(state, obj, cfg);
    result.evaluations += perIteration;
    result.trace.push_back({state.iteration, state.bestFit, state.fitness.mean()});
  }
  result.bestPos = state.bestPos;
  result.bestFit = state.bestFit;
  return result;
}

std::string trace_csv(const std::vector<SsaTraceRow>& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,bestFit,meanFit\n";
  for (const auto& row : trace) out << row.iteration << ',' << row.bestFit << ',' << row.meanFit << '\n';
  return out.str();
}

void write_trace_csv(const std::vector<SsaTraceRow>& trace, const std::filesystem::path& path) {
  detail::write_file(path, trace_csv(trace));
}

double sphere(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

double rosenbrock(std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    acc += 100.0 * a * a + b * b;
  }
  return acc;
}

}  // namespace mlskelm
