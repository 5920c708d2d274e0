#include "mlskelm/serial.hpp"

#include <algorithm>
#include <cmath>

#include "mlskelm/error.hpp"

namespace mlskelm::serial {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw DataError("squared_distances: dimension mismatch");
  Eigen::MatrixXd d2(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double d = a(i, k) - b(j, k);
        acc += d * d;
      }
      d2(i, j) = acc;
    }
  }
  return d2;
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, double gamma) {
  Eigen::MatrixXd k = squared_distances(x, x);
  for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = std::exp(-gamma * k.data()[i]);
  return k;
}

HyperCube multiscale_stack(const HyperCube& reduced, const std::vector<RtvParams>& scales) {
  if (scales.empty()) throw ConfigError("multiscale_stack needs at least one scale");
  const std::size_t k = reduced.bands();
  HyperCube out(reduced.height(), reduced.width(), k * scales.size());
  for (std::size_t l = 0; l < scales.size(); ++l) {
    for (std::size_t b = 0; b < k; ++b) out.set_band(l * k + b, rtv_smooth(reduced.band_image(b), scales[l]));
  }
  return out;
}

FeatureMatrix lbp_features(const HyperCube& cube, const LbpConfig& cfg) {
  cfg.validate();
  FeatureMatrix out(cube.pixels(), cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const Image img = cube.band_image(b);
    for (std::size_t r = 0; r < cube.height(); ++r) {
      for (std::size_t c = 0; c < cube.width(); ++c) {
        out(static_cast<Eigen::Index>(r * cube.width() + c), static_cast<Eigen::Index>(b)) =
            lbp_code(img, r, c, cfg) / 255.0;
      }
    }
  }
  return out;
}

FeatureMatrix kpca_project(const KpcaModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.landmarks.cols()) throw DataError("KPCA projection: feature dim mismatch");
  const Eigen::Index m = model.landmarks.rows();
  FeatureMatrix out = FeatureMatrix::Zero(data.rows(), model.projection.cols());
  Eigen::VectorXd k(m);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (model.gamma == 0.0) {
        k[j] = data.row(i).dot(model.landmarks.row(j));
      } else {
        k[j] = std::exp(-model.gamma * (data.row(i) - model.landmarks.row(j)).squaredNorm());
      }
    }
    const double rowMean = k.mean();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double centered = k[j] - model.kernelColMeans[j] - rowMean + model.kernelMean;
      for (Eigen::Index n = 0; n < out.cols(); ++n) out(i, n) += centered * model.projection(j, n);
    }
  }
  return out;
}

Prediction predict(const KelmModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() > 0 && x.cols() != model.trainX.cols()) throw DataError("predict: feature dim mismatch");
  Prediction out;
  out.scores = Eigen::MatrixXd::Zero(x.rows(), model.alpha.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < model.trainX.rows(); ++j) {
      const double kij = std::exp(-model.hyper.gamma * (x.row(i) - model.trainX.row(j)).squaredNorm());
      for (Eigen::Index c = 0; c < model.alpha.cols(); ++c) out.scores(i, c) += kij * model.alpha(j, c);
    }
  }
  out.labels = decide(out.scores, model.classIds);
  return out;
}

}  // namespace mlskelm::serial
