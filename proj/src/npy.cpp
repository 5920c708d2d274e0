// NPY (numpy .npy) array reader. Supports format versions 1.0-3.0, C order,
// little- or big-endian numeric dtypes.

#include <cmath>
#include <cstdint>
#include <regex>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "mlskelm/datacube.hpp"
#include "mlskelm/error.hpp"

namespace mlskelm {

namespace {

struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> values;  // C order
};

template <typename T>
void widen(const char* data, std::size_t count, bool bigEndian, std::vector<double>& out) {
  const auto raw = detail::decode_le<T>(data, count, bigEndian);
  out.assign(raw.begin(), raw.end());
}

NpyArray read_npy(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) {
    throw DataError("not an NPY file: " + path.string());
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t headerLen = 0;
  std::size_t offset = 0;
  if (major == 1) {
    headerLen = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw DataError("truncated NPY header: " + path.string());
    for (int i = 3; i >= 0; --i) headerLen = (headerLen << 8) | static_cast<unsigned char>(bytes[8 + i]);
    offset = 12;
  } else {
    throw DataError("unsupported NPY version " + std::to_string(major));
  }
  if (offset + headerLen > bytes.size()) throw DataError("truncated NPY header: " + path.string());
  const std::string header = bytes.substr(offset, headerLen);

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([<>|=])([a-z])(\d+)')"))) {
    throw DataError("NPY header lacks descr: " + path.string());
  }
  const char order = m[1].str()[0];
  const char kind = m[2].str()[0];
  const int size = std::stoi(m[3].str());
  if (std::regex_search(header, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    throw DataError("Fortran-ordered NPY arrays are not supported");
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw DataError("NPY header lacks shape: " + path.string());
  }
  NpyArray arr;
  const std::string dims = m[1].str();
  const std::regex digits(R"(\d+)");
  for (std::sregex_iterator it(dims.begin(), dims.end(), digits), end; it != end; ++it) {
    arr.shape.push_back(std::stoull(it->str()));
  }
  std::size_t count = 1;
  for (auto d : arr.shape) count *= d;

  const char* data = bytes.data() + offset + headerLen;
  const std::size_t available = bytes.size() - offset - headerLen;
  if (available != count * static_cast<std::size_t>(size)) {
    throw DataError("payload length mismatch in NPY file " + path.string());
  }
  const bool big = order == '>';
  const std::string code = std::string(1, kind) + std::to_string(size);
  if (code == "f4") widen<float>(data, count, big, arr.values);
  else if (code == "f8") widen<double>(data, count, big, arr.values);
  else if (code == "u1") widen<std::uint8_t>(data, count, big, arr.values);
  else if (code == "i1") widen<std::int8_t>(data, count, big, arr.values);
  else if (code == "u2") widen<std::uint16_t>(data, count, big, arr.values);
  else if (code == "i2") widen<std::int16_t>(data, count, big, arr.values);
  else if (code == "u4") widen<std::uint32_t>(data, count, big, arr.values);
  else if (code == "i4") widen<std::int32_t>(data, count, big, arr.values);
  else if (code == "u8") widen<std::uint64_t>(data, count, big, arr.values);
  else if (code == "i8") widen<std::int64_t>(data, count, big, arr.values);
  else throw DataError("unsupported NPY dtype '" + code + "'");
  return arr;
}

}  // namespace

HyperCube load_npy_cube(const std::filesystem::path& path) {
  const auto arr = read_npy(path);
  if (arr.shape.size() != 3) throw DataError("cube NPY must have shape (H, W, B)");
  const std::size_t h = arr.shape[0], w = arr.shape[1], b = arr.shape[2];
  std::vector<float> values(h * w * b);
  // (H, W, B) C order is band-interleaved-by-pixel; transpose to band-sequential.
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t k = 0; k < b; ++k) {
      const double v = arr.values[p * b + k];
      if (!std::isfinite(v)) throw DataError("non-finite value at index " + std::to_string(p * b + k));
      values[k * h * w + p] = static_cast<float>(v);
    }
  }
  return HyperCube(h, w, b, std::move(values));
}

LabelRaster load_npy_labels(const std::filesystem::path& path, std::size_t numClasses) {
  const auto arr = read_npy(path);
  if (arr.shape.size() != 2) throw DataError("label NPY must have shape (H, W)");
  std::vector<std::uint16_t> labels(arr.values.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = arr.values[i];
    if (v < 0 || v > 65535 || v != std::floor(v)) {
      throw DataError("invalid label value at index " + std::to_string(i));
    }
    labels[i] = static_cast<std::uint16_t>(v);
  }
  return LabelRaster(arr.shape[0], arr.shape[1], numClasses, std::move(labels));
}

}  // namespace mlskelm
