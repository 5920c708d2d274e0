#include "mlskelm/metrics.hpp"

#include <sstream>

#include "binary_io.hpp"
#include "mlskelm/error.hpp"

namespace mlskelm {

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
  if (cm.num_classes() == 0 || cm.total() == 0) throw DataError("metrics of an empty confusion matrix");
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t numClasses)
    : classes_(numClasses), counts_(numClasses * numClasses, 0) {}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t reference) const {
  std::uint64_t s = 0;
  for (std::size_t j = 0; j < classes_; ++j) s += at(reference, j);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t predicted) const {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < classes_; ++i) s += at(i, predicted);
  return s;
}

ConfusionMatrix confusion(std::span<const int> trueLabels, std::span<const int> predLabels,
                          std::size_t numClasses) {
  if (trueLabels.size() != predLabels.size()) throw DataError("confusion: length mismatch");
  ConfusionMatrix cm(numClasses);
  const auto c = static_cast<int>(numClasses);
  for (std::size_t k = 0; k < trueLabels.size(); ++k) {
    const int t = trueLabels[k], p = predLabels[k];
    if (t < 1 || t > c || p < 1 || p > c) {
      throw DataError("confusion: label out of range 1.." + std::to_string(c) + " at index " +
                      std::to_string(k));
    }
    ++cm.at(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(p - 1));
  }
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  std::uint64_t diag = 0;
  for (std::size_t i = 0; i < cm.num_classes(); ++i) diag += cm.at(i, i);
  return static_cast<double>(diag) / static_cast<double>(cm.total());
}

double average_accuracy(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  long double sum = 0.0L;
  std::size_t present = 0;
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    const auto row = cm.row_sum(i);
    if (row == 0) continue;
    sum += static_cast<long double>(cm.at(i, i)) / static_cast<long double>(row);
    ++present;
  }
  return static_cast<double>(sum / static_cast<long double>(present));
}

double kappa(const ConfusionMatrix& cm) {
  require_nonempty(cm);
  // kappa = (N * trace - sum row*col) / (N^2 - sum row*col), kept in integers until the final division.
  using Wide = unsigned __int128;
  const Wide total = cm.total();
  Wide diag = 0, chance = 0;
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    diag += cm.at(i, i);
    chance += static_cast<Wide>(cm.row_sum(i)) * cm.col_sum(i);
  }
  const Wide denom = total * total - chance;
  if (denom == 0) return 1.0;
  const Wide agree = total * diag;
  const double num = agree >= chance ? static_cast<double>(agree - chance) : -static_cast<double>(chance - agree);
  return num / static_cast<double>(denom);
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  for (std::size_t j = 0; j < cm.num_classes(); ++j) out << (j ? "," : "") << j + 1;
  out << '\n';
  for (std::size_t i = 0; i < cm.num_classes(); ++i) {
    for (std::size_t j = 0; j < cm.num_classes(); ++j) out << (j ? "," : "") << cm.at(i, j);
    out << '\n';
  }
  return out.str();
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  detail::write_file(path, confusion_csv(cm));
}

ConfusionMatrix parse_confusion_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("confusion CSV is empty");
  std::size_t classes = 1;
  for (char ch : line) classes += ch == ',' ? 1 : 0;
  if (line.empty()) classes = 0;
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < classes; ++i) {
    if (!std::getline(in, line)) throw DataError("confusion CSV has too few rows");
    std::istringstream row(line);
    std::string cell;
    for (std::size_t j = 0; j < classes; ++j) {
      if (!std::getline(row, cell, ',')) throw DataError("confusion CSV row " + std::to_string(i) + " too short");
      try {
        cm.at(i, j) = std::stoull(cell);
      } catch (const std::exception&) {
        throw DataError("confusion CSV has a non-integer cell: '" + cell + "'");
      }
    }
  }
  return cm;
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  return parse_confusion_csv(detail::read_file(path));
}

}  // namespace mlskelm
