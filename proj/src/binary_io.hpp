#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "mlskelm/error.hpp"

namespace mlskelm::detail {

template <typename T>
T byteswap_value(T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

/// Appends `values` to `out` as little-endian bytes.
template <typename T>
void append_le(std::string& out, std::span<const T> values) {
  const std::size_t offset = out.size();
  out.resize(offset + values.size() * sizeof(T));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data() + offset, values.data(), values.size() * sizeof(T));
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T v = byteswap_value(values[i]);
      std::memcpy(out.data() + offset + i * sizeof(T), &v, sizeof(T));
    }
  }
}

/// Decodes little-endian values from raw bytes.
template <typename T>
std::vector<T> decode_le(const char* data, std::size_t count, bool bigEndian = false) {
  std::vector<T> out(count);
  std::memcpy(out.data(), data, count * sizeof(T));
  const bool swap = bigEndian != (std::endian::native == std::endian::big);
  if (swap) {
    for (auto& v : out) v = byteswap_value(v);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace mlskelm::detail
