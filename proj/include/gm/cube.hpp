#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gm/error.hpp"

namespace gm {

// Hyperspectral cube: H x W x B reflectances (row-major h, w, b) with an
// optional per-pixel label plane. Label 0 means unlabeled; classes are
// 1..num_classes.
struct HsiCube {
  int64_t height = 0;
  int64_t width = 0;
  int64_t bands = 0;
  int64_t num_classes = 0;
  std::vector<float> values;    // height * width * bands
  std::vector<int32_t> labels;  // height * width, or empty for inference-only cubes

  bool has_labels() const { return !labels.empty(); }
  float value(int64_t h, int64_t w, int64_t b) const {
    return values[size_t((h * width + w) * bands + b)];
  }
  float& value(int64_t h, int64_t w, int64_t b) {
    return values[size_t((h * width + w) * bands + b)];
  }
  int32_t label(int64_t h, int64_t w) const { return labels[size_t(h * width + w)]; }
};

// Fixed 32-byte header ("HSIC", u32 version/H/W/B/C/dtype/label-flag), then
// row-major float32 values, then int32 labels if the flag is set. Everything
// little-endian; round-trips are bit-exact.
void save_cube(const HsiCube& cube, const std::string& path);
HsiCube load_cube(const std::string& path);

// Scene partitioned into C contiguous grid regions; class c gets a Gaussian
// bump spectral signature centered at band B*(c-0.5)/C with width B/(2C),
// plus i.i.d. N(0, sigma^2) noise. Labels cover every pixel.
HsiCube generate_synthetic(int64_t height, int64_t width, int64_t bands, int64_t classes,
                           double sigma, uint64_t seed);

// The noiseless signature the generator assigns to class c (1-based); the
// nearest-centroid separability oracle in the tests recomputes against this.
std::vector<float> synthetic_signature(int64_t bands, int64_t classes, int64_t c);

// Per-band min-max rescale to [0,1]; constant bands collapse to 0.
void normalize_bands(HsiCube& cube);

}  // namespace gm
