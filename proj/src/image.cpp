#include "lcount/image.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace lcount {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) {
    throw std::runtime_error(std::string("cannot open ") + path.string() + " (" +
                             std::strerror(errno) + ")");
  }
  return f;
}

bool is_png(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  unsigned char sig[8] = {};
  is.read(reinterpret_cast<char*>(sig), 8);
  return is.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

Image load_png(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("malformed PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  Image img(w, h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = img.rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Image load_jpeg(const std::filesystem::path& path, bool header_only) {
  auto f = open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("unsupported or malformed image: " + path.string());
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f.get());
  jpeg_read_header(&cinfo, TRUE);
  Image img;
  if (header_only) {
    img.width = static_cast<int>(cinfo.image_width);
    img.height = static_cast<int>(cinfo.image_height);
    jpeg_destroy_decompress(&cinfo);
    return img;
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {
  if (w < 0 || h < 0) throw std::invalid_argument("Image: negative dimensions");
}

Image load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing image file: " + path.string());
  return is_png(path) ? load_png(path) : load_jpeg(path, false);
}

std::pair<int, int> read_image_size(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing image file: " + path.string());
  if (is_png(path)) {
    std::ifstream is(path, std::ios::binary);
    unsigned char hdr[24] = {};
    is.read(reinterpret_cast<char*>(hdr), 24);
    auto be32 = [&](int o) {
      return (static_cast<int>(hdr[o]) << 24) | (hdr[o + 1] << 16) | (hdr[o + 2] << 8) | hdr[o + 3];
    };
    return {be32(16), be32(20)};
  }
  const Image img = load_jpeg(path, true);
  return {img.width, img.height};
}

void save_png(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw std::invalid_argument("save_png: empty image");
  std::FILE* raw = std::fopen(path.c_str(), "wb");
  if (!raw) {
    throw std::runtime_error("cannot write " + path.string() + " (" + std::strerror(errno) + ")");
  }
  FilePtr f(raw);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed writing PNG: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(img.px(0, y)));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw std::runtime_error("failed writing PNG: " + path.string());
}

Image resize_bilinear(const Image& img, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("resize_bilinear: bad output size");
  if (out_w == img.width && out_h == img.height) return img;
  const auto patch = sample_patch(img, 0, 0, img.width, img.height, out_w, out_h);
  Image out(out_w, out_h);
  for (std::size_t i = 0; i < patch.size(); ++i) {
    out.rgb[i] = static_cast<std::uint8_t>(std::clamp(std::lround(patch[i] * 255.0), 0L, 255L));
  }
  return out;
}

Image crop(const Image& img, int x, int y, int w, int h) {
  Image out(w, h);
  for (int yy = 0; yy < h; ++yy) {
    const int sy = y + yy;
    if (sy < 0 || sy >= img.height) continue;
    for (int xx = 0; xx < w; ++xx) {
      const int sx = x + xx;
      if (sx < 0 || sx >= img.width) continue;
      std::memcpy(out.px(xx, yy), img.px(sx, sy), 3);
    }
  }
  return out;
}

std::vector<double> sample_patch(const Image& img, double x1, double y1, double x2, double y2,
                                 int out_w, int out_h) {
  if (img.empty()) throw std::invalid_argument("sample_patch: empty image");
  if (out_w <= 0 || out_h <= 0 || x2 <= x1 || y2 <= y1) {
    throw std::invalid_argument("sample_patch: degenerate box or output size");
  }
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h * 3);
  const double sx = (x2 - x1) / out_w;
  const double sy = (y2 - y1) / out_h;
  const double max_x = img.width - 1;
  const double max_y = img.height - 1;
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp(y1 + (oy + 0.5) * sy - 0.5, 0.0, max_y);
    const int y0 = static_cast<int>(fy);
    const int yb = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp(x1 + (ox + 0.5) * sx - 0.5, 0.0, max_x);
      const int x0 = static_cast<int>(fx);
      const int xb = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      const auto* p00 = img.px(x0, y0);
      const auto* p01 = img.px(xb, y0);
      const auto* p10 = img.px(x0, yb);
      const auto* p11 = img.px(xb, yb);
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - ty) * ((1 - tx) * p00[c] + tx * p01[c]) +
                         ty * ((1 - tx) * p10[c] + tx * p11[c]);
        out[(static_cast<std::size_t>(oy) * out_w + ox) * 3 + c] = v / 255.0;
      }
    }
  }
  return out;
}

}  // namespace lcount
