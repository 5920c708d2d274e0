#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "mlskelm/error.hpp"
#include "mlskelm/mstv.hpp"

namespace mlskelm {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Forward differences; the last column (dx) or row (dy) has no edge and is 0.
Image diff_x(const Image& s) {
  Image d = Image::Zero(s.rows(), s.cols());
  if (s.cols() > 1) d.leftCols(s.cols() - 1) = s.rightCols(s.cols() - 1) - s.leftCols(s.cols() - 1);
  return d;
}

Image diff_y(const Image& s) {
  Image d = Image::Zero(s.rows(), s.cols());
  if (s.rows() > 1) d.topRows(s.rows() - 1) = s.bottomRows(s.rows() - 1) - s.topRows(s.rows() - 1);
  return d;
}

// Edge weight u * w: u is the windowed reciprocal of the windowed gradient
// magnitude (inherent variation), w the reciprocal of the local gradient.
Image edge_weights(const Image& grad, double sigma, double epsS, double epsL) {
  const Image windowed = gaussian_blur(grad, sigma);
  const Image u = gaussian_blur(1.0 / (windowed.abs() + epsL), sigma);
  const Image w = 1.0 / (grad.abs() + epsS);
  return u * w;
}

using SpMat = Eigen::SparseMatrix<double>;

SpMat assemble_system(const Image& wx, const Image& wy, double lambda) {
  const Eigen::Index rows = wx.rows(), cols = wx.cols();
  const Eigen::Index n = rows * cols;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * n));
  Eigen::VectorXd diag = Eigen::VectorXd::Ones(n);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index p = r * cols + c;
      if (c + 1 < cols) {
        const double w = lambda * wx(r, c);
        trip.emplace_back(p, p + 1, -w);
        trip.emplace_back(p + 1, p, -w);
        diag[p] += w;
        diag[p + 1] += w;
      }
      if (r + 1 < rows) {
        const double w = lambda * wy(r, c);
        trip.emplace_back(p, p + cols, -w);
        trip.emplace_back(p + cols, p, -w);
        diag[p] += w;
        diag[p + cols] += w;
      }
    }
  }
  for (Eigen::Index p = 0; p < n; ++p) trip.emplace_back(p, p, diag[p]);
  SpMat a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace

void RtvParams::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("rtv lambda must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("rtv sigma must be > 0");
  if (iterations < 1) throw ConfigError("rtv iterations must be >= 1");
  if (!(epsilonS > 0.0) || !(epsilonL > 0.0)) throw ConfigError("rtv epsilons must be > 0");
}

Image gaussian_blur(const Image& input, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const Eigen::Index rows = input.rows(), cols = input.cols();
  Image tmp(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const Eigen::Index cc = std::clamp<Eigen::Index>(c + i, 0, cols - 1);
        acc += k[i + radius] * input(r, cc);
      }
      tmp(r, c) = acc;
    }
  }
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        const Eigen::Index rr = std::clamp<Eigen::Index>(r + i, 0, rows - 1);
        acc += k[i + radius] * tmp(rr, c);
      }
      out(r, c) = acc;
    }
  }
  return out;
}

double total_variation(const Image& img) {
  return diff_x(img).abs().sum() + diff_y(img).abs().sum();
}

Image rtv_smooth(const Image& input, const RtvParams& params) {
  params.validate();
  if (!input.allFinite()) throw DataError("rtv_smooth: non-finite input");
  if (params.lambda == 0.0 || input.size() <= 1) return input;

  const Eigen::Index n = input.size();
  const Eigen::Map<const Eigen::VectorXd> rhs(input.data(), n);
  Eigen::SimplicialLDLT<SpMat> solver;
  Image s = input;
  for (int it = 0; it < params.iterations; ++it) {
    const Image wx = edge_weights(diff_x(s), params.sigma, params.epsilonS, params.epsilonL);
    const Image wy = edge_weights(diff_y(s), params.sigma, params.epsilonS, params.epsilonL);
    const SpMat a = assemble_system(wx, wy, params.lambda);
    if (it == 0) solver.analyzePattern(a);
    solver.factorize(a);
    if (solver.info() != Eigen::Success) {
      throw NumericalError("rtv_smooth: factorization failed at iteration " + std::to_string(it));
    }
    Eigen::VectorXd x = solver.solve(rhs);
    const double residual = (a * x - rhs).lpNorm<Eigen::Infinity>();
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
    if (!x.allFinite() || !(residual <= 1e-9 * scale)) {
      std::ostringstream msg;
      msg << "rtv_smooth: linear solve did not converge (residual " << residual << ")";
      throw NumericalError(msg.str());
    }
    s = Eigen::Map<const Image>(x.data(), input.rows(), input.cols());
  }
  return s;
}

std::vector<RtvParams> default_rtv_scales() {
  std::vector<RtvParams> scales;
  for (double sigma : {1.0, 2.0, 3.0}) {
    RtvParams p;
    p.sigma = sigma;
    p.lambda = 0.005;
    scales.push_back(p);
  }
  return scales;
}

}  // namespace mlskelm
