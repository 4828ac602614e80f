#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace lcount {

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  std::uint8_t* px(int x, int y) { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* px(int x, int y) const {
    return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool empty() const { return width == 0 || height == 0; }
  bool operator==(const Image&) const = default;
};

/// Reads PNG (lossless) or JPEG (accepted, never written). Throws on failure.
Image load_image(const std::filesystem::path& path);
/// Reads only the dimensions of a PNG or JPEG file.
std::pair<int, int> read_image_size(const std::filesystem::path& path);
/// Writes an 8-bit RGB PNG. Output bytes depend only on the pixels.
void save_png(const Image& img, const std::filesystem::path& path);

/// Bilinear resize with half-pixel centers; results rounded to 8 bits.
Image resize_bilinear(const Image& img, int out_w, int out_h);
/// Copies the rectangle [x, x+w) x [y, y+h); pixels outside the source are black.
Image crop(const Image& img, int x, int y, int w, int h);

/// Samples the box [x1,x2) x [y1,y2) into an out_h x out_w x 3 float patch in
/// [0,1] with bilinear interpolation (half-pixel centers, edge clamped).
std::vector<double> sample_patch(const Image& img, double x1, double y1, double x2,
                                 double y2, int out_w, int out_h);

}  // namespace lcount
