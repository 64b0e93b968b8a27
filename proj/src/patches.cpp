#include "gm/patches.hpp"

#include <algorithm>
#include <map>

#include "gm/rng.hpp"

namespace gm {

int64_t patch_count(int64_t extent, int64_t patch, int64_t stride) {
  return (extent - patch) / stride + 1;
}

double overlap_ratio(int64_t patch, int64_t stride) {
  return 1.0 - double(stride) / double(patch);
}

PatchSet extract_patches(const HsiCube& cube, int64_t patch_size, int64_t stride) {
  if (patch_size % 2 == 0)
    raise(ErrorKind::InvalidArgument,
          "patch size must be odd, got " + std::to_string(patch_size));
  if (stride < 1 || stride > patch_size)
    raise(ErrorKind::InvalidArgument, "stride " + std::to_string(stride) +
                                          " outside [1, " + std::to_string(patch_size) + "]");
  if (patch_size > std::min(cube.height, cube.width))
    raise(ErrorKind::ShapeMismatch, "patch size " + std::to_string(patch_size) +
                                        " exceeds cube extents " + std::to_string(cube.height) +
                                        "x" + std::to_string(cube.width));
  PatchSet ps;
  ps.patch_size = patch_size;
  ps.stride = stride;
  ps.bands = cube.bands;
  ps.grid_rows = patch_count(cube.height, patch_size, stride);
  ps.grid_cols = patch_count(cube.width, patch_size, stride);
  int64_t m = ps.grid_rows * ps.grid_cols;
  int64_t half = patch_size / 2;
  ps.data.resize(size_t(m * patch_size * patch_size * cube.bands));
  ps.centers.reserve(size_t(m));
  ps.labels.reserve(size_t(m));
  float* dst = ps.data.data();
  for (int64_t gy = 0; gy < ps.grid_rows; ++gy) {
    for (int64_t gx = 0; gx < ps.grid_cols; ++gx) {
      int64_t top = gy * stride, left = gx * stride;
      int64_t alpha = top + half, beta = left + half;
      ps.centers.emplace_back(alpha, beta);
      ps.labels.push_back(cube.has_labels() ? cube.label(alpha, beta) : 0);
      for (int64_t y = 0; y < patch_size; ++y) {
        const float* src = &cube.values[size_t(((top + y) * cube.width + left) * cube.bands)];
        std::copy_n(src, size_t(patch_size * cube.bands), dst);
        dst += patch_size * cube.bands;
      }
    }
  }
  return ps;
}

Split stratified_split(const PatchSet& patches, double fraction, uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    raise(ErrorKind::InvalidArgument,
          "train fraction must lie in (0, 1], got " + std::to_string(fraction));
  std::map<int32_t, std::vector<int64_t>> by_class;
  for (int64_t i = 0; i < patches.count(); ++i) {
    int32_t lab = patches.labels[size_t(i)];
    if (lab > 0) by_class[lab].push_back(i);
  }
  if (by_class.empty()) raise(ErrorKind::SplitError, "no labeled patches to split");
  Split split;
  Rng rng(seed);
  for (auto& [cls, idx] : by_class) {
    if (idx.size() < 2)
      raise(ErrorKind::SplitError, "class " + std::to_string(cls) + " has only " +
                                       std::to_string(idx.size()) +
                                       " labeled sample(s); need at least 2");
    rng.shuffle(idx);
    auto n_train = size_t(std::ceil(fraction * double(idx.size())));
    n_train = std::max<size_t>(n_train, 1);
    for (size_t i = 0; i < idx.size(); ++i)
      (i < n_train ? split.train : split.test).push_back(idx[i]);
  }
  return split;
}

}  // namespace gm
