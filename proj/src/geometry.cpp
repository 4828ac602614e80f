#include "lcount/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lcount {

long round_half_up(double v) { return static_cast<long>(std::floor(v + 0.5)); }

void validate_box(const ExemplarBox& box, int width, int height) {
  if (box.width() < 1 || box.height() < 1) {
    throw std::invalid_argument("exemplar box has zero extent (" + std::to_string(box.width()) +
                                "x" + std::to_string(box.height()) + " px)");
  }
  if (box.ix1() < 0 || box.iy1() < 0 || box.ix2() > width || box.iy2() > height) {
    throw std::invalid_argument("exemplar box [" + std::to_string(box.ix1()) + "," +
                                std::to_string(box.iy1()) + "," + std::to_string(box.ix2()) + "," +
                                std::to_string(box.iy2()) + "] outside " + std::to_string(width) +
                                "x" + std::to_string(height) + " image");
  }
}

Grid scale_embedding(long h_i, long w_i, long h, long w) {
  if (h_i <= 0 || w_i <= 0 || h <= 0 || w <= 0) {
    throw std::invalid_argument("scale_embedding: all extents must be positive");
  }
  Grid g(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  const double ry = static_cast<double>(h) / static_cast<double>(h_i);
  const double rx = static_cast<double>(w) / static_cast<double>(w_i);
  for (long m = 0; m < h; ++m)
    for (long n = 0; n < w; ++n) g.at(m, n) = m * ry + n * rx;
  return g;
}

double magnitude_embedding(std::span<const ExemplarBox> boxes, long h, long w) {
  if (boxes.empty()) throw std::invalid_argument("magnitude_embedding: no exemplars");
  double acc = 0.0;
  for (const auto& b : boxes) {
    if (b.width() < 1 || b.height() < 1) {
      throw std::invalid_argument("magnitude_embedding: zero-area exemplar box");
    }
    acc += static_cast<double>(w * h) / static_cast<double>(b.width() * b.height());
  }
  return acc / static_cast<double>(boxes.size());
}

double scale_prior(std::span<const ExemplarBox> boxes) {
  if (boxes.empty()) throw std::invalid_argument("scale_prior: no exemplars");
  double sum_h = 0.0, sum_w = 0.0;
  for (const auto& b : boxes) {
    if (b.width() < 1 || b.height() < 1) {
      throw std::invalid_argument("scale_prior: zero-area exemplar box");
    }
    sum_h += static_cast<double>(b.height());
    sum_w += static_cast<double>(b.width());
  }
  return std::sqrt(sum_h * sum_w) / static_cast<double>(boxes.size());
}

void BranchThresholds::validate() const {
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    if (!(bounds[i] > 0.0) || (i > 0 && !(bounds[i] > bounds[i - 1]))) {
      throw std::invalid_argument("branch thresholds must be positive and strictly increasing");
    }
  }
}

std::size_t select_branch(double s, const BranchThresholds& thresholds) {
  if (!(s > 0.0)) throw std::invalid_argument("select_branch: scale prior must be positive");
  for (std::size_t i = 0; i < thresholds.bounds.size(); ++i) {
    if (s <= thresholds.bounds[i]) return i;
  }
  return thresholds.bounds.size();
}

ExemplarSet make_exemplar_set(const Image& image, std::span<const ExemplarBox> boxes,
                              long exemplar_size) {
  if (boxes.empty() || boxes.size() > kMaxExemplars) {
    throw std::invalid_argument("exemplar set needs 1 to 3 boxes, got " +
                                std::to_string(boxes.size()));
  }
  if (exemplar_size <= 0) throw std::invalid_argument("exemplar size must be positive");
  ExemplarSet set;
  set.patch_size = exemplar_size;
  for (const auto& b : boxes) {
    validate_box(b, image.width, image.height);
    set.boxes.push_back(b);
    set.patches.push_back(sample_patch(image, static_cast<double>(b.ix1()),
                                       static_cast<double>(b.iy1()), static_cast<double>(b.ix2()),
                                       static_cast<double>(b.iy2()), static_cast<int>(exemplar_size),
                                       static_cast<int>(exemplar_size)));
    set.scale_maps.push_back(scale_embedding(b.height(), b.width(), exemplar_size, exemplar_size));
  }
  set.magnitude = magnitude_embedding(set.boxes, exemplar_size, exemplar_size);
  set.scale_prior = scale_prior(set.boxes);
  return set;
}

}  // namespace lcount
