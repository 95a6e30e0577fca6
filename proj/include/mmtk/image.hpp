#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mmtk {

// 8-bit interleaved raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  void fill_rect(int x, int y, int w, int h, std::uint8_t value);
};

// Binary PGM/PPM (P5/P6, maxval 255) and 8-bit PNG (gray, gray+alpha, RGB,
// RGBA; alpha is dropped).
Image load_image(const std::string& path);

// P5 for one channel, P6 for three.
void save_pnm(const std::string& path, const Image& img);

}  // namespace mmtk
