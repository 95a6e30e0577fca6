#include "mmtk/image.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>

#include "mmtk/error.hpp"

namespace mmtk {

void Image::fill_rect(int x, int y, int w, int h, std::uint8_t value) {
  for (int yy = y; yy < y + h && yy < height; ++yy) {
    for (int xx = x; xx < x + w && xx < width; ++xx) {
      for (int c = 0; c < channels; ++c) at(xx, yy, c) = value;
    }
  }
}

namespace {

int read_pnm_int(std::istream& in) {
  int c;
  while ((c = in.peek()) != EOF) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  if (!(in >> v)) throw InputError("malformed PNM header");
  return v;
}

Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FilesystemError("cannot open " + path);
  char magic[2];
  in.read(magic, 2);
  const int channels = magic[1] == '5' ? 1 : 3;
  const int w = read_pnm_int(in);
  const int h = read_pnm_int(in);
  const int maxval = read_pnm_int(in);
  if (w <= 0 || h <= 0 || maxval != 255) throw InputError(path + ": only 8-bit P5/P6 images are supported");
  in.get();  // single whitespace before the raster
  Image img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw InputError(path + ": truncated raster");
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

Image load_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw FilesystemError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw InputError(path + ": libpng initialisation failed");
  }
  Image img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError(path + ": corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * img.channels);
  rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) {
    rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
  }
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw FilesystemError("cannot open " + path);
  unsigned char head[8] = {};
  probe.read(reinterpret_cast<char*>(head), 8);
  if (head[0] == 'P' && (head[1] == '5' || head[1] == '6')) return load_pnm(path);
  if (png_sig_cmp(head, 0, 8) == 0) return load_png(path);
  throw InputError(path + ": unsupported image format (expected PNG or binary PGM/PPM)");
}

void save_pnm(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw InputError("save_pnm supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FilesystemError("cannot write " + path);
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw FilesystemError("write failed: " + path);
}

}  // namespace mmtk
