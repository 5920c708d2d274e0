#include "mlskelm/kelm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "binary_io.hpp"
#include "mlskelm/error.hpp"
#include "parallel.hpp"

namespace mlskelm {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'S', 'K', 'E', 'L', 'M', '1'};
constexpr Eigen::Index kRowBlock = 256;
constexpr int kMaxRefinements = 3;

std::size_t row_blocks(Eigen::Index rows) {
  return static_cast<std::size_t>((rows + kRowBlock - 1) / kRowBlock);
}

void append_row_major(std::string& out, const Eigen::MatrixXd& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  detail::append_le<double>(out, std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
}

Eigen::MatrixXd read_row_major(const std::string& bytes, std::size_t& offset, Eigen::Index rows,
                               Eigen::Index cols) {
  const auto count = static_cast<std::size_t>(rows * cols);
  if (offset + count * sizeof(double) > bytes.size()) throw DataError("model file truncated");
  const auto values = detail::decode_le<double>(bytes.data() + offset, count);
  offset += count * sizeof(double);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  std::copy(values.begin(), values.end(), rm.data());
  return rm;
}

}  // namespace

void KelmHyperparams::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("KELM C must be positive and finite");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("KELM gamma must be positive and finite");
  }
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DataError("rbf_kernel: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw DataError("squared_distances: dimension mismatch");
  Eigen::MatrixXd d2(a.rows(), b.rows());
  const Eigen::Index dims = a.cols();
  // Row-major copy of b keeps the inner loop contiguous.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> br = b;
  detail::parallel_for(row_blocks(a.rows()), [&](std::size_t block) {
    const Eigen::Index begin = static_cast<Eigen::Index>(block) * kRowBlock;
    const Eigen::Index end = std::min(a.rows(), begin + kRowBlock);
    Eigen::VectorXd ai(dims);
    for (Eigen::Index i = begin; i < end; ++i) {
      ai = a.row(i).transpose();
      for (Eigen::Index j = 0; j < br.rows(); ++j) {
        const double* bj = br.data() + j * dims;
        double acc = 0.0;
        for (Eigen::Index k = 0; k < dims; ++k) {
          const double d = ai[k] - bj[k];
          acc += d * d;
        }
        d2(i, j) = acc;
      }
    }
  });
  return d2;
}

Eigen::MatrixXd rbf_from_squared_distances(const Eigen::MatrixXd& d2, double gamma) {
  return (-gamma * d2.array()).exp().matrix();
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, double gamma) {
  return rbf_from_squared_distances(squared_distances(x, x), gamma);
}

Eigen::MatrixXd one_hot(std::span<const int> labels, std::span<const int> classIds) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels.size()),
                                            static_cast<Eigen::Index>(classIds.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = std::find(classIds.begin(), classIds.end(), labels[i]);
    if (it == classIds.end()) {
      throw DataError("label " + std::to_string(labels[i]) + " is not a known class");
    }
    y(static_cast<Eigen::Index>(i), it - classIds.begin()) = 1.0;
  }
  return y;
}

Eigen::MatrixXd solve_coefficients(const Eigen::MatrixXd& kernel, const Eigen::MatrixXd& targets,
                                   double C) {
  if (kernel.rows() != kernel.cols() || kernel.rows() != targets.rows()) {
    throw DataError("solve_coefficients: shape mismatch");
  }
  Eigen::MatrixXd system = kernel;
  system.diagonal().array() += 1.0 / C;

  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) {
    Eigen::MatrixXd jittered = system;
    jittered.diagonal().array() += 1e-10;
    llt.compute(jittered);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("KELM Cholesky factorization failed (matrix not positive definite)");
    }
  }

  Eigen::MatrixXd alpha = llt.solve(targets);
  const double bound = 1e-8 * (1.0 + targets.lpNorm<Eigen::Infinity>());
  Eigen::MatrixXd residual = targets - system * alpha;
  for (int i = 0; i < kMaxRefinements && residual.lpNorm<Eigen::Infinity>() > bound; ++i) {
    alpha += llt.solve(residual);
    residual = targets - system * alpha;
  }
  const double r = residual.lpNorm<Eigen::Infinity>();
  if (!alpha.allFinite() || !(r <= bound)) {
    std::ostringstream msg;
    msg << "KELM solve residual " << r << " exceeds bound " << bound;
    throw NumericalError(msg.str());
  }
  return alpha;
}

KelmModel train(const Eigen::MatrixXd& x, std::span<const int> labels, const KelmHyperparams& hyper,
                std::size_t numClasses) {
  hyper.validate();
  if (static_cast<std::size_t>(x.rows()) != labels.size()) {
    throw DataError("train: feature rows and label count differ");
  }
  if (labels.empty()) throw DataError("train: no training samples");

  std::vector<int> classIds;
  if (numClasses == 0) {
    const std::set<int> seen(labels.begin(), labels.end());
    classIds.assign(seen.begin(), seen.end());
  } else {
    const std::set<int> seen(labels.begin(), labels.end());
    for (int c = 1; c <= static_cast<int>(numClasses); ++c) {
      if (!seen.contains(c)) {
        throw DataError("class absent from training set: " + std::to_string(c));
      }
      classIds.push_back(c);
    }
  }

  KelmModel model{x, {}, hyper, classIds};
  model.alpha = solve_coefficients(gram_matrix(x, hyper.gamma), one_hot(labels, classIds), hyper.C);
  return model;
}

std::vector<int> decide(const Eigen::MatrixXd& scores, std::span<const int> classIds) {
  std::vector<int> labels(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      // classIds ascend, so the first maximum is the lowest id
      if (scores(i, j) > scores(i, best)) best = j;
    }
    labels[static_cast<std::size_t>(i)] = classIds[static_cast<std::size_t>(best)];
  }
  return labels;
}

Prediction predict(const KelmModel& model, const Eigen::MatrixXd& x) {
  Prediction out;
  out.scores.resize(x.rows(), model.alpha.cols());
  if (x.rows() == 0) return out;
  if (x.cols() != model.trainX.cols()) {
    throw DataError("predict: feature dim " + std::to_string(x.cols()) + " != model dim " +
                    std::to_string(model.trainX.cols()));
  }
  detail::parallel_for(row_blocks(x.rows()), [&](std::size_t block) {
    const Eigen::Index begin = static_cast<Eigen::Index>(block) * kRowBlock;
    const Eigen::Index len = std::min(kRowBlock, x.rows() - begin);
    const Eigen::MatrixXd k =
        rbf_from_squared_distances(squared_distances(x.middleRows(begin, len), model.trainX),
                                   model.hyper.gamma);
    out.scores.middleRows(begin, len).noalias() = k * model.alpha;
  });
  out.labels = decide(out.scores, model.classIds);
  return out;
}

double mse_fitness(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& targets) {
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols()) {
    throw DataError("mse_fitness: shape mismatch");
  }
  if (scores.size() == 0) return 0.0;
  return (scores - targets).squaredNorm() / static_cast<double>(scores.size());
}

void save_model(const KelmModel& model, const std::filesystem::path& path) {
  const nlohmann::json header = {
      {"C", model.hyper.C},
      {"gamma", model.hyper.gamma},
      {"n", model.trainX.rows()},
      {"d", model.trainX.cols()},
      {"c", model.alpha.cols()},
      {"classIds", model.classIds},
      {"dtype", "f64"},
      {"order", "row-major"},
      {"byteorder", "little"},
  };
  const std::string text = header.dump();
  std::string bytes(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  detail::append_le<std::uint64_t>(bytes, std::span<const std::uint64_t>(&len, 1));
  bytes += text;
  append_row_major(bytes, model.trainX);
  append_row_major(bytes, model.alpha);
  detail::write_file(path, bytes);
}

KelmModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a KELM model file: " + path.string());
  }
  const auto len = detail::decode_le<std::uint64_t>(bytes.data() + 8, 1)[0];
  if (16 + len > bytes.size()) throw DataError("model file truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("malformed model header: ") + e.what());
  }
  KelmModel model;
  model.hyper = {header.at("C").get<double>(), header.at("gamma").get<double>()};
  model.classIds = header.at("classIds").get<std::vector<int>>();
  const auto n = header.at("n").get<Eigen::Index>();
  const auto d = header.at("d").get<Eigen::Index>();
  const auto c = header.at("c").get<Eigen::Index>();
  if (static_cast<std::size_t>(c) != model.classIds.size()) {
    throw DataError("model header class count mismatch");
  }
  std::size_t offset = 16 + len;
  model.trainX = read_row_major(bytes, offset, n, d);
  model.alpha = read_row_major(bytes, offset, n, c);
  if (offset != bytes.size()) throw DataError("payload length mismatch in model file");
  model.hyper.validate();
  return model;
}

}  // namespace mlskelm
