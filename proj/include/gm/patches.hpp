#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "gm/cube.hpp"
#include "gm/tensor.hpp"

namespace gm {

// Overlapping patches cut from a cube: m blocks of S x S x B, enumerated
// row-major by center. A patch's label is its center pixel's; label 0 marks
// it unlabeled (kept, but excluded from supervised splits).
struct PatchSet {
  int64_t patch_size = 0;
  int64_t stride = 0;
  int64_t bands = 0;
  int64_t grid_rows = 0;  // centers per column of the patch grid
  int64_t grid_cols = 0;
  std::vector<float> data;                          // m * S * S * B
  std::vector<std::pair<int64_t, int64_t>> centers;  // (alpha, beta) pixel coords
  std::vector<int32_t> labels;                      // m center-pixel labels

  int64_t count() const { return int64_t(labels.size()); }
  const float* patch(int64_t i) const {
    return data.data() + size_t(i * patch_size * patch_size * bands);
  }
  // One patch as a (1, S, S, B) tensor in the requested precision.
  template <typename T>
  Tensor<T> patch_tensor(int64_t i) const {
    Tensor<T> t({1, patch_size, patch_size, bands});
    const float* p = patch(i);
    for (size_t j = 0; j < t.data.size(); ++j) t.data[j] = T(p[j]);
    return t;
  }
};

// Closed-form patch-grid arithmetic; extract_patches must agree with these.
int64_t patch_count(int64_t extent, int64_t patch, int64_t stride);  // per axis
double overlap_ratio(int64_t patch, int64_t stride);                 // 1 - s/S

// Preconditions: 1 <= s <= S <= min(H, W); S odd so the center pixel exists.
// Only fully interior patches are cut — no padding.
PatchSet extract_patches(const HsiCube& cube, int64_t patch_size, int64_t stride);

// Per-class labeled patch indices split fraction/1-fraction, deterministic in
// seed. Every labeled class needs >= 2 samples; each contributes
// ceil(fraction * n_c) train samples (at least 1).
struct Split {
  std::vector<int64_t> train;
  std::vector<int64_t> test;
};
Split stratified_split(const PatchSet& patches, double fraction, uint64_t seed);

}  // namespace gm
