#pragma once

#include <cstddef>
#include <filesystem>

#include "lcount/counter.hpp"
#include "lcount/grid.hpp"
#include "lcount/image.hpp"

namespace lcount {

/// De-redundified count map on the token grid; total is the image count.
struct NormalizedCountMap {
  Grid values;
  double total = 0.0;
};

/// Spreads each window count uniformly over its kp x kp tokens, accumulates
/// per token, and divides by the number of windows covering that token.
/// Uncovered tokens are 0.
///
/// Each token gathers the windows that contain it in row-major window order,
/// so the result matches a scatter loop over windows bit for bit.
NormalizedCountMap normalize(const Grid& redundant, const WindowGeometry& g);
NormalizedCountMap normalize(const RedundantCountMap& r);

/// Number of windows of `g` that contain each token.
Grid coverage_frequency(const WindowGeometry& g);

double image_count(const NormalizedCountMap& c);

enum class VisualMode { kDetection, kDensity };

struct VisualizationMap {
  VisualMode mode = VisualMode::kDetection;
  Grid hint;     // 1 on the selected cells, 0 elsewhere
  Grid overlay;  // detection: hint; density: hint * count map
  std::size_t n_top = 0;
};

/// round(total * M_e), half up, clamped to [0, cells].
std::size_t top_count(double total, double magnitude, std::size_t cells);

/// Marks the n_top largest match-attention cells (ties by row-major index).
/// The count map is bilinearly resized to the match map when shapes differ.
VisualizationMap visualize(const NormalizedCountMap& c, const Grid& match_map, double magnitude,
                           VisualMode mode);

struct RenderOptions {
  double opacity = 0.6;
  std::uint8_t color[3] = {255, 32, 32};
};

/// Upsamples the overlay to the image (nearest for detection, bilinear for
/// density), scales it to [0,1] by its maximum, and alpha-blends the overlay
/// colour at opacity * weight. A zero overlay returns the base unchanged.
Image render_overlay(const Grid& overlay, VisualMode mode, const Image& base,
                     const RenderOptions& opts = {});
/// render_overlay followed by save_png.
void render(const Grid& overlay, VisualMode mode, const Image& base,
            const std::filesystem::path& path, const RenderOptions& opts = {});

}  // namespace lcount
