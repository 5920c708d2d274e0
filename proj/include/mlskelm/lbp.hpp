#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "mlskelm/datacube.hpp"

namespace mlskelm {

/// 3x3 local binary pattern settings. Only P = 8, radius = 1 is supported.
struct LbpConfig {
  int neighbors = 8;
  int radius = 1;
  bool replicateBorder = true;

  void validate() const;
};

/// Neighbour offsets (drow, dcol) in bit order: clockwise from the top-left,
/// i.e. TL, T, TR, R, BR, B, BL, L. Bit p carries weight 2^p.
inline constexpr std::array<std::array<int, 2>, 8> kLbpOffsets{{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}}};

/// sum_p 2^p * [i_p >= i_c] over the 3x3 ring, replicate padding at borders.
std::uint8_t lbp_code(const Image& image, std::size_t row, std::size_t col,
                      const LbpConfig& cfg = {});

/// Per-band LBP codes scaled by 1/255, one column per band (pixels x bands).
/// Parallel over bands; results do not depend on the thread count.
FeatureMatrix lbp_features(const HyperCube& cube, const LbpConfig& cfg = {});

}  // namespace mlskelm
