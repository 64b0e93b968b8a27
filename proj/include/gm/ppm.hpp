#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gm/error.hpp"

namespace gm {

// Class 0 (unlabeled / border) is black; classes 1..16 walk a fixed
// high-contrast palette and wrap beyond it.
std::array<uint8_t, 3> class_color(int32_t cls);

// Binary P6 at 8 bits per channel.
void write_ppm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& rgb);

// Render a class map (height x width, row-major) straight to disk.
void write_class_map(const std::string& path, int64_t width, int64_t height,
                     const std::vector<int32_t>& classes);

}  // namespace gm
