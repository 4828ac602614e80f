#pragma once

// Ground truth from dot annotations, the scale-gated L1 loss and the mosaic
// augmentation.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "lcount/counter.hpp"
#include "lcount/dataset.hpp"
#include "lcount/geometry.hpp"
#include "lcount/grid.hpp"
#include "lcount/tensor.hpp"

namespace lcount {

struct DensityMap {
  Grid values;  // height x width, pixel resolution
  std::size_t dot_count = 0;
};

struct DensityOptions {
  double sigma_divisor = 4.0;  // sigma = max(sigma_min, s / sigma_divisor)
  double sigma_min = 1.0;
  double truncate = 4.0;  // kernel radius = ceil(truncate * sigma)
};

/// Gaussian kernel width used for a scale prior s.
double density_sigma(double s, const DensityOptions& opts = {});

/// One isotropic Gaussian per dot, evaluated at pixel centres (i + 0.5),
/// truncated to a disc of radius ceil(truncate * sigma), clipped to the image
/// and renormalized to unit mass.
DensityMap density_from_dots(std::span<const Point> dots, int width, int height, double s,
                             const DensityOptions& opts = {});

/// Sum of the density over every k x k pixel window at stride z, laid out as
/// the window grid of `g`. The pixel window grid must coincide with it.
RedundantCountMap redundant_gt(const DensityMap& d, const WindowGeometry& g);

/// Mean |pred - gt| over the window grid of the branch selected by s. Only
/// the selected branch enters the graph, so other branches receive no
/// gradient at all.
Tensor gated_l1_loss(const std::vector<RedundantCountMap>& preds,
                     const std::vector<RedundantCountMap>& gts, double s,
                     const BranchThresholds& thresholds);

struct MosaicOptions {
  int size = 384;           // output side, the crop resolution
  int placement_retries = 20;
};

/// 2x2 mosaic: a random region of `current` fills a random quadrant and keeps
/// its dots and exemplar boxes (translated); the other quadrants are random
/// crops of pool images from other categories and carry no dots. Returns
/// `current` unchanged when no such pool image exists or no region holding
/// every exemplar box is found within the retry budget.
AnnotatedImage mosaic_augment(const AnnotatedImage& current,
                              const std::vector<const AnnotatedImage*>& pool,
                              std::mt19937_64& rng, const MosaicOptions& opts = {});

}  // namespace lcount
