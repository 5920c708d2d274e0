#include "mlskelm/lbp.hpp"

#include <algorithm>

#include "mlskelm/error.hpp"
#include "parallel.hpp"

namespace mlskelm {

namespace {

template <typename Pixel>
std::uint8_t code_at(const Pixel& pixel, long rows, long cols, long r, long c) {
  const auto center = pixel(r, c);
  std::uint8_t code = 0;
  for (std::size_t p = 0; p < kLbpOffsets.size(); ++p) {
    const long rr = std::clamp(r + kLbpOffsets[p][0], 0L, rows - 1);
    const long cc = std::clamp(c + kLbpOffsets[p][1], 0L, cols - 1);
    if (pixel(rr, cc) >= center) code |= static_cast<std::uint8_t>(1u << p);
  }
  return code;
}

}  // namespace

void LbpConfig::validate() const {
  if (neighbors != 8 || radius != 1) {
    throw ConfigError("only the 3x3 LBP (neighbors = 8, radius = 1) is supported");
  }
  if (!replicateBorder) throw ConfigError("only replicate border padding is supported");
}

std::uint8_t lbp_code(const Image& image, std::size_t row, std::size_t col, const LbpConfig& cfg) {
  cfg.validate();
  if (row >= static_cast<std::size_t>(image.rows()) || col >= static_cast<std::size_t>(image.cols())) {
    throw DataError("lbp_code: pixel outside image");
  }
  return code_at([&](long r, long c) { return image(r, c); }, image.rows(), image.cols(),
                 static_cast<long>(row), static_cast<long>(col));
}

FeatureMatrix lbp_features(const HyperCube& cube, const LbpConfig& cfg) {
  cfg.validate();
  const long rows = static_cast<long>(cube.height()), cols = static_cast<long>(cube.width());
  FeatureMatrix out(cube.pixels(), cube.bands());
  detail::parallel_for(cube.bands(), [&](std::size_t b) {
    const auto band = cube.band(b);
    const auto pixel = [&](long r, long c) { return band[static_cast<std::size_t>(r * cols + c)]; };
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        out(r * cols + c, static_cast<Eigen::Index>(b)) = code_at(pixel, rows, cols, r, c) / 255.0;
      }
    }
  });
  return out;
}

}  // namespace mlskelm
