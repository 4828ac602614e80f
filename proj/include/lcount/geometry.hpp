#pragma once

// Quantities derived from exemplar box geometry: per-exemplar scale-embedding
// maps, the magnitude embedding, the scale prior and counter branch selection.

#include <cstddef>
#include <span>
#include <vector>

#include "lcount/grid.hpp"
#include "lcount/image.hpp"

namespace lcount {

/// Rounds to the nearest integer, ties towards +infinity.
long round_half_up(double v);

/// Axis-aligned exemplar box in pixel coordinates of the (resized) image.
/// Coordinates may be fractional; integer extents use round_half_up.
struct ExemplarBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  long ix1() const { return round_half_up(x1); }
  long iy1() const { return round_half_up(y1); }
  long ix2() const { return round_half_up(x2); }
  long iy2() const { return round_half_up(y2); }
  long width() const { return ix2() - ix1(); }
  long height() const { return iy2() - iy1(); }

  bool operator==(const ExemplarBox&) const = default;
};

/// Throws std::invalid_argument unless the box has at least 1x1 px extent
/// and lies inside a width x height image.
void validate_box(const ExemplarBox& box, int width, int height);

/// S(m, n) = m * (h / h_i) + n * (w / w_i) over an h x w grid.
Grid scale_embedding(long h_i, long w_i, long h, long w);

/// M_e = (1/l) * sum_i (w * h) / (w_i * h_i).
double magnitude_embedding(std::span<const ExemplarBox> boxes, long h, long w);

/// s = (1/l) * sqrt(sum_i h_i * sum_i w_i).
double scale_prior(std::span<const ExemplarBox> boxes);

/// Upper bounds of every branch interval but the last, strictly increasing.
/// Branch b serves (bounds[b-1], bounds[b]]; the last interval is unbounded.
struct BranchThresholds {
  std::vector<double> bounds{32.0, 64.0};

  std::size_t branch_count() const { return bounds.size() + 1; }
  void validate() const;
  bool operator==(const BranchThresholds&) const = default;
};

/// Zero-based branch index whose right-closed interval contains s.
std::size_t select_branch(double s, const BranchThresholds& thresholds);

inline constexpr std::size_t kMaxExemplars = 3;

struct ExemplarSet {
  std::vector<ExemplarBox> boxes;
  /// Per exemplar: exemplar_size x exemplar_size x 3 floats in [0,1].
  std::vector<std::vector<double>> patches;
  std::vector<Grid> scale_maps;
  long patch_size = 0;  // side length h = w of every patch
  double magnitude = 0.0;
  double scale_prior = 0.0;

  std::size_t size() const { return boxes.size(); }
};

/// Crops and bilinearly resizes each box of `image` to exemplar_size^2 and
/// derives scale maps, M_e and s. Requires 1..3 valid boxes.
ExemplarSet make_exemplar_set(const Image& image, std::span<const ExemplarBox> boxes,
                              long exemplar_size);

}  // namespace lcount
