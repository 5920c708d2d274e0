#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mlskelm {

/// Per-pixel feature vectors, one row per pixel (pixel index = row * width + col).
using FeatureMatrix = Eigen::MatrixXd;

/// Single-band raster, rows x cols.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W x B raster of per-pixel spectra, stored band-sequential: all of band 0
/// in row-major order, then band 1, and so on. Every value is finite.
class HyperCube {
 public:
  HyperCube() = default;
  /// Zero-filled cube.
  HyperCube(std::size_t height, std::size_t width, std::size_t bands);
  /// Takes ownership of band-sequential values; throws DataError on size mismatch or
  /// a non-finite value.
  HyperCube(std::size_t height, std::size_t width, std::size_t bands, std::vector<float> values);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t bands() const { return bands_; }
  std::size_t pixels() const { return height_ * width_; }

  float at(std::size_t row, std::size_t col, std::size_t band) const {
    return values_[band * pixels() + row * width_ + col];
  }
  float& at(std::size_t row, std::size_t col, std::size_t band) {
    return values_[band * pixels() + row * width_ + col];
  }

  std::span<const float> band(std::size_t b) const {
    return {values_.data() + b * pixels(), pixels()};
  }
  std::span<float> band(std::size_t b) { return {values_.data() + b * pixels(), pixels()}; }

  std::span<const float> values() const { return values_; }

  /// Band `b` widened to double.
  Image band_image(std::size_t b) const;
  void set_band(std::size_t b, const Image& img);

  bool operator==(const HyperCube&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t bands_ = 0;
  std::vector<float> values_;
};

/// Ground-truth or predicted labels; 0 = unlabeled, otherwise 1..numClasses.
class LabelRaster {
 public:
  LabelRaster() = default;
  /// Throws DataError if a label exceeds numClasses or the size is wrong.
  LabelRaster(std::size_t height, std::size_t width, std::size_t numClasses,
              std::vector<std::uint16_t> labels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return height_ * width_; }
  std::size_t num_classes() const { return num_classes_; }

  std::uint16_t at(std::size_t row, std::size_t col) const { return labels_[row * width_ + col]; }
  std::uint16_t operator[](std::size_t pixel) const { return labels_[pixel]; }
  std::span<const std::uint16_t> labels() const { return labels_; }

  /// Pixel count per class, index 0 holds the unlabeled count.
  std::vector<std::size_t> class_counts() const;
  /// Indices of every labeled pixel, ascending.
  std::vector<std::size_t> labeled_pixels() const;
  /// Throws DataError naming the missing classes if any of 1..numClasses is absent.
  void require_all_classes() const;

  bool operator==(const LabelRaster&) const = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<std::uint16_t> labels_;
};

struct SampleSplit {
  std::vector<std::size_t> trainIdx;  // ascending
  std::vector<std::size_t> testIdx;   // ascending
  double fraction = 0.0;
  std::uint64_t seed = 0;
};

/// Training samples drawn for a class of `classSize` labeled pixels:
/// max(1, round(fraction * classSize)), never more than classSize.
std::size_t train_count_for_class(std::size_t classSize, double fraction);

/// Per-class random split; deterministic for a fixed seed.
SampleSplit stratified_split(const LabelRaster& labels, double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Canonical on-disk format: "<base>.json" header + "<base>.bin" little-endian
// payload. Any of the base path, the header or the payload path is accepted.

struct CubeFiles {
  std::filesystem::path header;
  std::filesystem::path payload;
};
CubeFiles cube_files(const std::filesystem::path& path);

/// Loads a canonical cube, or an NPY array of shape (H, W, B) when the path ends in .npy.
HyperCube load_cube(const std::filesystem::path& path);
void save_cube(const HyperCube& cube, const std::filesystem::path& path);

/// Loads a canonical u16 label raster or an NPY (H, W) integer array.
LabelRaster load_labels(const std::filesystem::path& path, std::size_t numClasses);
/// Same, additionally checking the raster matches the companion cube's dimensions.
LabelRaster load_labels(const std::filesystem::path& path, std::size_t numClasses,
                        const HyperCube& companion);
/// Loads a label raster taking numClasses as its largest label.
LabelRaster load_labels_inferred(const std::filesystem::path& path);
void save_labels(const LabelRaster& labels, const std::filesystem::path& path);

/// NPY v1.0 readers. Values are converted to float / uint16.
HyperCube load_npy_cube(const std::filesystem::path& path);
LabelRaster load_npy_labels(const std::filesystem::path& path, std::size_t numClasses);

/// Pixels x bands matrix of a cube.
FeatureMatrix cube_to_features(const HyperCube& cube);
/// Inverse of cube_to_features; used to checkpoint feature matrices in the cube format.
HyperCube features_to_cube(const FeatureMatrix& features, std::size_t height, std::size_t width);

}  // namespace mlskelm
