#include "mlskelm/datacube.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <json.hpp>

#include "binary_io.hpp"
#include "mlskelm/error.hpp"
#include "mlskelm/rng.hpp"

namespace mlskelm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kOrder = "row-major-band-sequential";

void check_finite(std::span<const float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("non-finite value at index " + std::to_string(i));
    }
  }
}

std::size_t header_dim(const json& header, const char* key) {
  if (!header.contains(key) || !header[key].is_number_integer() || header[key].get<long long>() < 1) {
    throw DataError(std::string("header field '") + key + "' missing or not a positive integer");
  }
  return header[key].get<std::size_t>();
}

struct Header {
  std::size_t height, width, bands;
  std::string dtype;
};

Header read_header(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing file: " + path.string());
  json header;
  try {
    header = json::parse(detail::read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError("malformed header " + path.string() + ": " + e.what());
  }
  Header h{header_dim(header, "height"), header_dim(header, "width"), header_dim(header, "bands"),
           header.value("dtype", "")};
  if (header.value("order", kOrder) != std::string(kOrder)) {
    throw DataError("unsupported order '" + header["order"].get<std::string>() + "'");
  }
  if (header.value("byteorder", "little") != std::string("little")) {
    throw DataError("unsupported byteorder; only 'little' is accepted");
  }
  return h;
}

std::string header_text(std::size_t height, std::size_t width, std::size_t bands, const char* dtype) {
  json header = {{"height", height},     {"width", width}, {"bands", bands},
                 {"dtype", dtype},       {"order", kOrder}, {"byteorder", "little"}};
  return header.dump(2) + "\n";
}

std::string load_payload(const fs::path& path, std::size_t expectedBytes) {
  if (!fs::exists(path)) throw DataError("missing file: " + path.string());
  std::string bytes = detail::read_file(path);
  if (bytes.size() != expectedBytes) {
    std::ostringstream msg;
    msg << "payload length mismatch: " << path.string() << " has " << bytes.size()
        << " bytes, header declares " << expectedBytes;
    throw DataError(msg.str());
  }
  return bytes;
}

bool is_npy(const fs::path& path) { return path.extension() == ".npy"; }

}  // namespace

HyperCube::HyperCube(std::size_t height, std::size_t width, std::size_t bands)
    : HyperCube(height, width, bands, std::vector<float>(height * width * bands, 0.0f)) {}

HyperCube::HyperCube(std::size_t height, std::size_t width, std::size_t bands,
                     std::vector<float> values)
    : height_(height), width_(width), bands_(bands), values_(std::move(values)) {
  if (height == 0 || width == 0 || bands == 0) {
    throw DataError("cube dimensions must be positive");
  }
  if (values_.size() != height * width * bands) {
    throw DataError("cube value count " + std::to_string(values_.size()) + " != " +
                    std::to_string(height * width * bands));
  }
  check_finite(values_);
}

Image HyperCube::band_image(std::size_t b) const {
  Image img(height_, width_);
  const auto src = band(b);
  for (std::size_t i = 0; i < src.size(); ++i) img.data()[i] = src[i];
  return img;
}

void HyperCube::set_band(std::size_t b, const Image& img) {
  if (static_cast<std::size_t>(img.rows()) != height_ ||
      static_cast<std::size_t>(img.cols()) != width_) {
    throw DataError("band image size does not match cube");
  }
  auto dst = band(b);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto v = static_cast<float>(img.data()[i]);
    if (!std::isfinite(v)) throw DataError("non-finite value in band " + std::to_string(b));
    dst[i] = v;
  }
}

LabelRaster::LabelRaster(std::size_t height, std::size_t width, std::size_t numClasses,
                         std::vector<std::uint16_t> labels)
    : height_(height), width_(width), num_classes_(numClasses), labels_(std::move(labels)) {
  if (height == 0 || width == 0) throw DataError("label raster dimensions must be positive");
  if (labels_.size() != height * width) throw DataError("label count does not match raster size");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] > numClasses) {
      throw DataError("label " + std::to_string(labels_[i]) + " at pixel " + std::to_string(i) +
                      " exceeds numClasses " + std::to_string(numClasses));
    }
  }
}

std::vector<std::size_t> LabelRaster::class_counts() const {
  std::vector<std::size_t> counts(num_classes_ + 1, 0);
  for (auto l : labels_) ++counts[l];
  return counts;
}

std::vector<std::size_t> LabelRaster::labeled_pixels() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0) idx.push_back(i);
  }
  return idx;
}

void LabelRaster::require_all_classes() const {
  const auto counts = class_counts();
  std::string missing;
  for (std::size_t c = 1; c <= num_classes_; ++c) {
    if (counts[c] == 0) missing += (missing.empty() ? "" : ",") + std::to_string(c);
  }
  if (num_classes_ == 0) throw DataError("numClasses must be at least 1");
  if (!missing.empty()) {
    throw DataError("class 1.." + std::to_string(num_classes_) + " absent: " + missing);
  }
}

std::size_t train_count_for_class(std::size_t classSize, double fraction) {
  const auto rounded = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(classSize)));
  return std::min(classSize, std::max<std::size_t>(1, rounded));
}

SampleSplit stratified_split(const LabelRaster& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1]");
  }
  labels.require_all_classes();

  std::vector<std::vector<std::size_t>> members(labels.num_classes() + 1);
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (labels[i] != 0) members[labels[i]].push_back(i);
  }

  SampleSplit split{{}, {}, fraction, seed};
  for (std::size_t c = 1; c <= labels.num_classes(); ++c) {
    auto& pool = members[c];
    const std::size_t take = train_count_for_class(pool.size(), fraction);
    Rng rng(derive_seed(seed, 0x5eed5b117ULL, c));
    const auto picks = rng.sample_without_replacement(pool.size(), take);
    std::vector<bool> chosen(pool.size(), false);
    for (auto p : picks) chosen[p] = true;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (chosen[i] ? split.trainIdx : split.testIdx).push_back(pool[i]);
    }
  }
  std::sort(split.trainIdx.begin(), split.trainIdx.end());
  std::sort(split.testIdx.begin(), split.testIdx.end());
  return split;
}

CubeFiles cube_files(const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".json" || ext == ".bin") {
    auto base = path;
    return {fs::path(base).replace_extension(".json"), fs::path(base).replace_extension(".bin")};
  }
  return {fs::path(path.string() + ".json"), fs::path(path.string() + ".bin")};
}

HyperCube load_cube(const fs::path& path) {
  if (is_npy(path)) return load_npy_cube(path);
  const auto files = cube_files(path);
  const auto h = read_header(files.header);
  if (h.dtype != "f32") throw DataError("cube dtype must be 'f32', got '" + h.dtype + "'");
  const std::size_t count = h.height * h.width * h.bands;
  const auto bytes = load_payload(files.payload, count * sizeof(float));
  auto values = detail::decode_le<float>(bytes.data(), count);
  check_finite(values);
  return HyperCube(h.height, h.width, h.bands, std::move(values));
}

void save_cube(const HyperCube& cube, const fs::path& path) {
  const auto files = cube_files(path);
  std::string payload;
  payload.reserve(cube.values().size() * sizeof(float));
  detail::append_le<float>(payload, cube.values());
  detail::write_file(files.header, header_text(cube.height(), cube.width(), cube.bands(), "f32"));
  detail::write_file(files.payload, payload);
}

namespace {

LabelRaster read_label_raster(const fs::path& path, std::size_t numClasses) {
  if (is_npy(path)) return load_npy_labels(path, numClasses);
  const auto files = cube_files(path);
  const auto h = read_header(files.header);
  if (h.dtype != "u16") throw DataError("label dtype must be 'u16', got '" + h.dtype + "'");
  if (h.bands != 1) throw DataError("label raster must have bands = 1");
  const std::size_t count = h.height * h.width;
  const auto bytes = load_payload(files.payload, count * sizeof(std::uint16_t));
  return LabelRaster(h.height, h.width, numClasses,
                     detail::decode_le<std::uint16_t>(bytes.data(), count));
}

}  // namespace

LabelRaster load_labels_inferred(const fs::path& path) {
  const auto raw = read_label_raster(path, 65535);
  const auto labels = raw.labels();
  const std::size_t maxLabel = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  LabelRaster raster(raw.height(), raw.width(), maxLabel,
                     std::vector<std::uint16_t>(labels.begin(), labels.end()));
  raster.require_all_classes();
  return raster;
}

LabelRaster load_labels(const fs::path& path, std::size_t numClasses) {
  LabelRaster raster = read_label_raster(path, numClasses);
  raster.require_all_classes();
  return raster;
}

LabelRaster load_labels(const fs::path& path, std::size_t numClasses, const HyperCube& companion) {
  auto raster = load_labels(path, numClasses);
  if (raster.height() != companion.height() || raster.width() != companion.width()) {
    throw DataError("label raster " + std::to_string(raster.height()) + "x" +
                    std::to_string(raster.width()) + " does not match cube " +
                    std::to_string(companion.height()) + "x" + std::to_string(companion.width()));
  }
  return raster;
}

void save_labels(const LabelRaster& labels, const fs::path& path) {
  const auto files = cube_files(path);
  std::string payload;
  detail::append_le<std::uint16_t>(payload, labels.labels());
  detail::write_file(files.header, header_text(labels.height(), labels.width(), 1, "u16"));
  detail::write_file(files.payload, payload);
}

FeatureMatrix cube_to_features(const HyperCube& cube) {
  FeatureMatrix f(cube.pixels(), cube.bands());
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    const auto band = cube.band(b);
    for (std::size_t p = 0; p < band.size(); ++p) f(p, b) = band[p];
  }
  return f;
}

HyperCube features_to_cube(const FeatureMatrix& features, std::size_t height, std::size_t width) {
  if (static_cast<std::size_t>(features.rows()) != height * width) {
    throw DataError("feature rows do not match height * width");
  }
  std::vector<float> values(static_cast<std::size_t>(features.size()));
  const std::size_t pixels = height * width;
  for (Eigen::Index b = 0; b < features.cols(); ++b) {
    for (std::size_t p = 0; p < pixels; ++p) {
      values[static_cast<std::size_t>(b) * pixels + p] = static_cast<float>(features(p, b));
    }
  }
  return HyperCube(height, width, static_cast<std::size_t>(features.cols()), std::move(values));
}

}  // namespace mlskelm
