#include "gm/cube.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "gm/rng.hpp"

namespace gm {

namespace {

constexpr char kMagic[4] = {'H', 'S', 'I', 'C'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 1;

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(p[i])) << (8 * i);
  return v;
}

}  // namespace

void save_cube(const HsiCube& cube, const std::string& path) {
  std::string buf;
  buf.reserve(32 + cube.values.size() * 4 + cube.labels.size() * 4);
  buf.append(kMagic, 4);
  put_u32(buf, kVersion);
  put_u32(buf, uint32_t(cube.height));
  put_u32(buf, uint32_t(cube.width));
  put_u32(buf, uint32_t(cube.bands));
  put_u32(buf, uint32_t(cube.num_classes));
  put_u32(buf, kDtypeF32);
  put_u32(buf, cube.has_labels() ? 1 : 0);
  for (float v : cube.values) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
  }
  for (int32_t l : cube.labels) put_u32(buf, uint32_t(l));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoError, "cannot open for writing: " + path);
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) raise(ErrorKind::IoError, "short write: " + path);
}

HsiCube load_cube(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::IoError, "cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    if (buf.size() < 4) raise(ErrorKind::Truncated, path + ": shorter than its own magic");
    raise(ErrorKind::BadMagic, path + ": not an HSIC cube file");
  }
  if (buf.size() < 32) raise(ErrorKind::Truncated, path + ": header cut short");
  uint32_t version = get_u32(buf.data() + 4);
  if (version != kVersion)
    raise(ErrorKind::BadMagic, path + ": unsupported HSIC version " + std::to_string(version));
  HsiCube cube;
  cube.height = get_u32(buf.data() + 8);
  cube.width = get_u32(buf.data() + 12);
  cube.bands = get_u32(buf.data() + 16);
  cube.num_classes = get_u32(buf.data() + 20);
  uint32_t dtype = get_u32(buf.data() + 24);
  uint32_t has_labels = get_u32(buf.data() + 28);
  if (dtype != kDtypeF32)
    raise(ErrorKind::BadMagic, path + ": unsupported dtype code " + std::to_string(dtype));
  if (cube.height < 1 || cube.width < 1 || cube.bands < 1)
    raise(ErrorKind::SizeMismatch, path + ": degenerate extents in header");
  size_t n_values = size_t(cube.height) * size_t(cube.width) * size_t(cube.bands);
  size_t n_labels = has_labels ? size_t(cube.height) * size_t(cube.width) : 0;
  size_t want = 32 + 4 * (n_values + n_labels);
  if (buf.size() != want)
    raise(ErrorKind::SizeMismatch, path + ": header declares " + std::to_string(want) +
                                       " bytes, file holds " + std::to_string(buf.size()));
  cube.values.resize(n_values);
  for (size_t i = 0; i < n_values; ++i) {
    uint32_t bits = get_u32(buf.data() + 32 + 4 * i);
    float v;
    std::memcpy(&v, &bits, 4);
    if (!std::isfinite(v))
      raise(ErrorKind::NonFinite, path + ": non-finite reflectance at index " + std::to_string(i));
    cube.values[i] = v;
  }
  cube.labels.resize(n_labels);
  for (size_t i = 0; i < n_labels; ++i) {
    int32_t l = int32_t(get_u32(buf.data() + 32 + 4 * (n_values + i)));
    if (l < 0 || l > cube.num_classes)
      raise(ErrorKind::SizeMismatch, path + ": label " + std::to_string(l) +
                                         " outside declared class count " +
                                         std::to_string(cube.num_classes));
    cube.labels[i] = l;
  }
  return cube;
}

std::vector<float> synthetic_signature(int64_t bands, int64_t classes, int64_t c) {
  std::vector<float> sig(static_cast<size_t>(bands));
  double center = double(bands) * (double(c) - 0.5) / double(classes);
  double width = double(bands) / (2.0 * double(classes));
  for (int64_t b = 0; b < bands; ++b) {
    double z = (double(b) - center) / width;
    sig[size_t(b)] = float(std::exp(-0.5 * z * z));
  }
  return sig;
}

HsiCube generate_synthetic(int64_t height, int64_t width, int64_t bands, int64_t classes,
                           double sigma, uint64_t seed) {
  if (classes < 2) raise(ErrorKind::InvalidArgument, "synthetic cube needs at least 2 classes");
  if (bands < classes)
    raise(ErrorKind::InvalidArgument, "synthetic cube needs bands >= classes to separate signatures");
  if (sigma < 0) raise(ErrorKind::InvalidArgument, "noise scale must be nonnegative");
  // grid of gr x gc regions, one class each; gr is the largest divisor of
  // `classes` not exceeding sqrt(classes), so regions stay near-square
  int64_t gr = int64_t(std::sqrt(double(classes)));
  while (gr > 1 && classes % gr != 0) --gr;
  int64_t gc = classes / gr;
  if (height < gr || width < gc)
    raise(ErrorKind::InvalidArgument, "scene " + std::to_string(height) + "x" +
                                          std::to_string(width) + " too small for " +
                                          std::to_string(gr) + "x" + std::to_string(gc) +
                                          " class regions");
  HsiCube cube;
  cube.height = height;
  cube.width = width;
  cube.bands = bands;
  cube.num_classes = classes;
  cube.values.resize(size_t(height * width * bands));
  cube.labels.resize(size_t(height * width));
  std::vector<std::vector<float>> sigs;
  for (int64_t c = 1; c <= classes; ++c) sigs.push_back(synthetic_signature(bands, classes, c));
  Rng rng(seed);
  for (int64_t h = 0; h < height; ++h) {
    int64_t row = std::min(h * gr / height, gr - 1);
    for (int64_t w = 0; w < width; ++w) {
      int64_t col = std::min(w * gc / width, gc - 1);
      int64_t c = row * gc + col + 1;
      cube.labels[size_t(h * width + w)] = int32_t(c);
      const auto& sig = sigs[size_t(c - 1)];
      for (int64_t b = 0; b < bands; ++b)
        cube.value(h, w, b) = float(double(sig[size_t(b)]) + sigma * rng.next_normal());
    }
  }
  return cube;
}

void normalize_bands(HsiCube& cube) {
  for (int64_t b = 0; b < cube.bands; ++b) {
    float lo = cube.value(0, 0, b), hi = lo;
    for (int64_t h = 0; h < cube.height; ++h)
      for (int64_t w = 0; w < cube.width; ++w) {
        float v = cube.value(h, w, b);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    float span = hi - lo;
    for (int64_t h = 0; h < cube.height; ++h)
      for (int64_t w = 0; w < cube.width; ++w) {
        float& v = cube.value(h, w, b);
        v = span > 0 ? (v - lo) / span : 0.0f;
      }
  }
}

}  // namespace gm
