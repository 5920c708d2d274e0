#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mlskelm/rng.hpp"

namespace mlskelm {

/// Fitness function over a d-dimensional box; lower is better. Must be
/// deterministic and safe to call concurrently.
struct Objective {
  std::size_t arity = 0;
  std::function<double(std::span<const double>)> evaluate;
};

struct SsaConfig {
  std::size_t popSize = 30;
  std::size_t maxIter = 20;
  double producerRatio = 0.2;    // PD
  double scoutRatio = 0.1;       // SD
  double safetyThreshold = 0.8;  // ST
  std::vector<double> lower;
  std::vector<double> upper;
  std::uint64_t seed = 0;
  /// Draw the scout step V from {0, 1} instead of N(0, 1).
  bool paperLiteralV = false;

  std::size_t dims() const { return lower.size(); }
  std::size_t producer_count() const;
  std::size_t scout_count() const;
  /// Requires lower <= upper; pass strictBounds to require lower < upper.
  void validate(bool strictBounds = true) const;
};

/// Population snapshot. `positions` and `fitness` hold each sparrow's best-known
/// position (greedy replacement); best/worst track the population extremes.
struct SsaState {
  Eigen::MatrixXd positions;  // n x d
  Eigen::VectorXd fitness;    // n
  Eigen::VectorXd bestPos;
  double bestFit = 0.0;
  Eigen::VectorXd worstPos;
  double worstFit = 0.0;
  std::size_t iteration = 0;

  /// Ascending-fitness order (stable on ties by index).
  std::vector<std::size_t> ranking() const;
  /// Recomputes best/worst from `fitness`; best only improves.
  void refresh_extremes();
};

struct SsaTraceRow {
  std::size_t iteration;
  double bestFit;
  double meanFit;
};

struct OptimizeResult {
  Eigen::VectorXd bestPos;
  double bestFit = 0.0;
  std::vector<SsaTraceRow> trace;  // one row per iteration, non-increasing bestFit
  std::size_t evaluations = 0;
};

// ---------------------------------------------------------------------------
// Per-coordinate update rules.

/// Producer, safe branch: x * exp(-rank / (alpha * maxIter)); rank is 1-based.
double producer_safe_step(double x, std::size_t rank, double alpha, std::size_t maxIter);
/// Producer, alarm branch: x + q.
double producer_alarm_step(double x, double q);
/// Joiner in the worse half: q * exp((worst - x) / rank^2).
double joiner_starving_step(double x, double worst, std::size_t rank, double q);
/// Joiner in the better half: D_F + (|x - D_F| . A) / d in every coordinate.
/// A is a row of +-1; dividing by d applies the pseudo-inverse A^T / (A A^T).
void joiner_follow_step(std::span<const double> x, std::span<const double> followBest,
                        std::span<const double> signs, std::span<double> out);
/// Scout away from the best: best + v * |x - best|.
double scout_flee_step(double x, double best, double v);
/// Scout already at the best: x + o * |x - worst| / ((fc - fw) + 1e-50).
double scout_edge_step(double x, double worst, double fc, double fw, double o);

inline constexpr double kScoutDelta = 1e-50;

// ---------------------------------------------------------------------------
// Role updates. Each returns candidate positions (rows of the population it
// touched) without evaluating them. Random draws come from per-sparrow
// substreams so results are independent of evaluation order.

struct Candidates {
  std::vector<std::size_t> sparrows;  // population indices
  Eigen::MatrixXd positions;          // one row per entry of `sparrows`
};

/// Shared per-iteration draws: R2 and the scout selection.
struct IterationDraws {
  double alarm = 0.0;  // R2 ~ U(0, 1)
  std::vector<std::size_t> scouts;
};
IterationDraws draw_iteration(const SsaConfig& cfg, std::size_t iteration);

Candidates update_producers(const SsaState& state, const SsaConfig& cfg, const IterationDraws& draws);
/// followBest is D_F, the best producer position after the producer step.
Candidates update_joiners(const SsaState& state, const SsaConfig& cfg,
                          const Eigen::VectorXd& followBest);
Candidates update_scouts(const SsaState& state, const SsaConfig& cfg, const IterationDraws& draws);

/// Clamps into [lower, upper]; a NaN coordinate falls back to `fallback`.
void clamp_to_bounds(std::span<double> x, const SsaConfig& cfg, std::span<const double> fallback);

/// Evaluates candidate positions in parallel, in order. Throws NumericalError
/// naming the position if the objective returns NaN.
std::vector<double> evaluate_candidates(const Candidates& candidates, const Objective& obj);

/// Greedy replacement: a candidate replaces its sparrow's position only if its
/// fitness is strictly lower.
void apply_greedy(SsaState& state, const Candidates& candidates, std::span<const double> fitness);

/// Uniform initialization inside the bounds plus initial evaluation.
SsaState initialize(const Objective& obj, const SsaConfig& cfg);

/// One full iteration: producers, joiners and scouts are all generated from the
/// population as it stood at the start of the iteration, then greedy replacement.
void step(SsaState& state, const Objective& obj, const SsaConfig& cfg);

OptimizeResult optimize(const Objective& obj, const SsaConfig& cfg);

/// CSV "iteration,bestFit,meanFit", one row per iteration.
void write_trace_csv(const std::vector<SsaTraceRow>& trace, const std::filesystem::path& path);
std::string trace_csv(const std::vector<SsaTraceRow>& trace);

// ---------------------------------------------------------------------------
// Global-best particle swarm baseline (comparison fixture).

struct PsoConfig {
  std::size_t popSize = 30;
  std::size_t maxIter = 200;
  double inertia = 0.7298;
  double cognitive = 1.49618;
  double social = 1.49618;
  double velocityFraction = 0.2;  // |v| <= fraction * (upper - lower)
  std::vector<double> lower;
  std::vector<double> upper;
  std::uint64_t seed = 0;
};

OptimizeResult optimize_pso(const Objective& obj, const PsoConfig& cfg);

// ---------------------------------------------------------------------------
// Benchmark functions.

double sphere(std::span<const double> x);
double rosenbrock(std::span<const double> x);

}  // namespace mlskelm
