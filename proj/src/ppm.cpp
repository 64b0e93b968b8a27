#include "gm/ppm.hpp"

#include <fstream>

namespace gm {

namespace {

constexpr std::array<uint8_t, 3> kPalette[16] = {
    {0xe6, 0x19, 0x4b}, {0x3c, 0xb4, 0x4b}, {0xff, 0xe1, 0x19}, {0x43, 0x63, 0xd8},
    {0xf5, 0x82, 0x31}, {0x91, 0x1e, 0xb4}, {0x46, 0xf0, 0xf0}, {0xf0, 0x32, 0xe6},
    {0xbc, 0xf6, 0x0c}, {0xfa, 0xbe, 0xbe}, {0x00, 0x80, 0x80}, {0xe6, 0xbe, 0xff},
    {0x9a, 0x63, 0x24}, {0xff, 0xfa, 0xc8}, {0x80, 0x00, 0x00}, {0xaa, 0xff, 0xc3},
};

}  // namespace

std::array<uint8_t, 3> class_color(int32_t cls) {
  if (cls <= 0) return {0, 0, 0};
  return kPalette[size_t((cls - 1) % 16)];
}

void write_ppm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& rgb) {
  if (width < 1 || height < 1)
    raise(ErrorKind::InvalidArgument, "image extents must be positive");
  if (int64_t(rgb.size()) != width * height * 3)
    raise(ErrorKind::SizeMismatch, "a " + std::to_string(width) + "x" + std::to_string(height) +
                                       " image needs " + std::to_string(width * height * 3) +
                                       " bytes, got " + std::to_string(rgb.size()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorKind::IoError, "cannot open for writing: " + path);
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
  if (!out) raise(ErrorKind::IoError, "short write: " + path);
}

void write_class_map(const std::string& path, int64_t width, int64_t height,
                     const std::vector<int32_t>& classes) {
  if (int64_t(classes.size()) != width * height)
    raise(ErrorKind::SizeMismatch, "class map size " + std::to_string(classes.size()) +
                                       " does not cover " + std::to_string(width) + "x" +
                                       std::to_string(height));
  std::vector<uint8_t> rgb(classes.size() * 3);
  for (size_t i = 0; i < classes.size(); ++i) {
    auto c = class_color(classes[i]);
    rgb[3 * i] = c[0];
    rgb[3 * i + 1] = c[1];
    rgb[3 * i + 2] = c[2];
  }
  write_ppm(path, width, height, rgb);
}

}  // namespace gm
