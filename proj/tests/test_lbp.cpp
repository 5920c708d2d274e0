#include <doctest.h>

#include <random>

#include "mlskelm/error.hpp"
#include "mlskelm/lbp.hpp"
#include "oracles.hpp"

using namespace mlskelm;

namespace {

Image from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Image img(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) img(r, c++) = v;
    ++r;
  }
  return img;
}

std::vector<int> codes_of(const Image& img) {
  std::vector<int> out;
  for (Eigen::Index r = 0; r < img.rows(); ++r)
    for (Eigen::Index c = 0; c < img.cols(); ++c)
      out.push_back(lbp_code(img, static_cast<std::size_t>(r), static_cast<std::size_t>(c)));
  return out;
}

}  // namespace

TEST_SUITE("lbp") {

TEST_CASE("hand-evaluated codes") {
  CHECK(lbp_code(Image::Constant(3, 3, 4.0), 1, 1) == 255);
  CHECK(lbp_code(from_rows({{1, 1, 1}, {1, 9, 1}, {1, 1, 1}}), 1, 1) == 0);
  CHECK(lbp_code(from_rows({{5, 9, 1}, {4, 7, 2}, {8, 3, 6}}), 1, 1) == 66);
}

TEST_CASE("single pixel and borders use replicate padding") {
  CHECK(lbp_code(Image::Constant(1, 1, 3.0), 0, 0) == 255);
  const Image img = from_rows({{1, 2}, {3, 4}});
  // top-left pixel: TL, T, BL, L replicate the centre itself.
  // neighbours TL=1 T=1 TR=2 R=2 BR=4 B=3 BL=3 L=1, all >= 1
  CHECK(lbp_code(img, 0, 0) == 255);
  // bottom-right (4): TL=1 T=2 TR=2 R=4 BR=4 B=4 BL=3 L=3 -> bits R, BR, B
  CHECK(lbp_code(img, 1, 1) == 8 + 16 + 32);
}

TEST_CASE("config rejects unsupported settings") {
  LbpConfig cfg;
  cfg.neighbors = 16;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.radius = 2;
  CHECK_THROWS_AS(lbp_features(HyperCube(2, 2, 1), cfg), ConfigError);
  cfg = {};
  cfg.replicateBorder = false;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(lbp_code(Image::Zero(2, 2), 2, 0), DataError);
}

TEST_CASE("brute-force equivalence on random images") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> level(0, 7);  // coarse levels exercise ties
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 5 + trial % 7, cols = 4 + trial % 5;
    std::vector<double> px(static_cast<std::size_t>(rows * cols));
    for (auto& v : px) v = level(gen);
    Image img(rows, cols);
    for (int i = 0; i < rows * cols; ++i) img(i / cols, i % cols) = px[static_cast<std::size_t>(i)];
    CHECK(codes_of(img) == oracle::lbp_codes(px, rows, cols));
  }
}

TEST_CASE("lbp_features layout and scaling") {
  SUBCASE("constant cube gives all ones") {
    HyperCube cube(4, 5, 3, std::vector<float>(60, 2.5f));
    const auto f = lbp_features(cube);
    CHECK(f.rows() == 20);
    CHECK(f.cols() == 3);
    CHECK((f.array() == 1.0).all());
  }
  SUBCASE("column b holds band b's codes over 255") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> v(6 * 7 * 2);
    for (auto& x : v) x = u(gen);
    const HyperCube cube(6, 7, 2, v);
    const auto f = lbp_features(cube);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto codes = codes_of(cube.band_image(b));
      for (std::size_t p = 0; p < 42; ++p) {
        CHECK(f(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(b)) == codes[p] / 255.0);
      }
    }
  }
  SUBCASE("145 x 145 x 20 gives 21025 x 20") {
    const auto f = lbp_features(HyperCube(145, 145, 20));
    CHECK(f.rows() == 21025);
    CHECK(f.cols() == 20);
  }
}

TEST_CASE("gray shift and positive scaling leave codes unchanged") {
  std::mt19937_64 gen(23);
  std::uniform_int_distribution<int> level(0, 50);
  Image img(16, 16);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = level(gen);
  const auto base = codes_of(img);
  CHECK(codes_of(img + 37.0) == base);
  CHECK(codes_of(img - 1000.0) == base);
  CHECK(codes_of(img * 3.0) == base);
  CHECK(codes_of(img * 0.5) == base);
}

}  // TEST_SUITE
