#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mlskelm {

/// c x c counts; rows are reference classes, columns predicted classes. Class
/// ids are 1..c, stored at index id - 1.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t numClasses);

  std::size_t num_classes() const { return classes_; }
  std::uint64_t at(std::size_t reference, std::size_t predicted) const {
    return counts_[reference * classes_ + predicted];
  }
  std::uint64_t& at(std::size_t reference, std::size_t predicted) {
    return counts_[reference * classes_ + predicted];
  }
  std::uint64_t total() const;
  std::uint64_t row_sum(std::size_t reference) const;
  std::uint64_t col_sum(std::size_t predicted) const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> trueLabels, std::span<const int> predLabels,
                          std::size_t numClasses);

/// trace / total.
double overall_accuracy(const ConfusionMatrix& cm);
/// Mean per-class recall over classes with at least one reference sample.
double average_accuracy(const ConfusionMatrix& cm);
/// (p_o - p_e) / (1 - p_e); defined as 1 when p_e = 1.
double kappa(const ConfusionMatrix& cm);

/// Header row of class ids, then one row of counts per reference class.
std::string confusion_csv(const ConfusionMatrix& cm);
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);
ConfusionMatrix parse_confusion_csv(const std::string& text);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

}  // namespace mlskelm
