#include "lcount/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace lcount {

double density_sigma(double s, const DensityOptions& opts) {
  return std::max(opts.sigma_min, s / opts.sigma_divisor);
}

DensityMap density_from_dots(std::span<const Point> dots, int width, int height, double s,
                             const DensityOptions& opts) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("density_from_dots: empty image");
  for (std::size_t i = 0; i < dots.size(); ++i) {
    const auto& p = dots[i];
    if (!(p.x >= 0 && p.x < width && p.y >= 0 && p.y < height)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "density_from_dots: dot %zu (%g, %g) outside %dx%d image", i,
                    p.x, p.y, width, height);
      throw std::invalid_argument(buf);
    }
  }
  DensityMap d;
  d.values = Grid(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
  d.dot_count = dots.size();
  const double sigma = density_sigma(s, opts);
  const double radius = std::ceil(opts.truncate * sigma);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> kernel;
  for (const auto& p : dots) {
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x - radius)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(p.x + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y - radius)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(p.y + radius)));
    const int kw = x1 - x0 + 1;
    kernel.assign(static_cast<std::size_t>(kw) * (y1 - y0 + 1), 0.0);
    double mass = 0.0;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - p.x, dy = y + 0.5 - p.y;
        const double r2 = dx * dx + dy * dy;
        if (r2 > radius * radius) continue;
        const double v = std::exp(-r2 * inv2s2);
        kernel[static_cast<std::size_t>(y - y0) * kw + (x - x0)] = v;
        mass += v;
      }
    // The pixel holding the dot is within radius, so mass > 0.
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        d.values.at(y, x) += kernel[static_cast<std::size_t>(y - y0) * kw + (x - x0)] / mass;
      }
  }
  return d;
}

RedundantCountMap redundant_gt(const DensityMap& d, const WindowGeometry& g) {
  const long h = static_cast<long>(d.values.rows), w = static_cast<long>(d.values.cols);
  if (g.k > h || g.k > w) {
    throw std::invalid_argument("redundant_gt: block size " + std::to_string(g.k) +
                                " exceeds the " + std::to_string(h) + "x" + std::to_string(w) +
                                " image");
  }
  if (g.z <= 0) throw std::invalid_argument("redundant_gt: stride must be positive");
  const long oh = (h - g.k) / g.z + 1, ow = (w - g.k) / g.z + 1;
  if (oh != g.out_h || ow != g.out_w) {
    throw std::invalid_argument("redundant_gt: pixel window grid " + std::to_string(oh) + "x" +
                                std::to_string(ow) + " differs from token window grid " +
                                std::to_string(g.out_h) + "x" + std::to_string(g.out_w));
  }
  // Integral image with a zero border row and column.
  std::vector<double> ii(static_cast<std::size_t>((h + 1) * (w + 1)), 0.0);
  auto at = [&](long y, long x) -> double& { return ii[static_cast<std::size_t>(y * (w + 1) + x)]; };
  for (long y = 0; y < h; ++y) {
    double row = 0.0;
    for (long x = 0; x < w; ++x) {
      row += d.values.at(y, x);
      at(y + 1, x + 1) = at(y, x + 1) + row;
    }
  }
  std::vector<double> vals(static_cast<std::size_t>(oh * ow));
  for (long jy = 0; jy < oh; ++jy)
    for (long jx = 0; jx < ow; ++jx) {
      const long y0 = jy * g.z, x0 = jx * g.z, y1 = y0 + g.k, x1 = x0 + g.k;
      vals[static_cast<std::size_t>(jy * ow + jx)] = at(y1, x1) - at(y0, x1) - at(y1, x0) + at(y0, x0);
    }
  return RedundantCountMap{
      Tensor({static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)}, std::move(vals)), g, 0};
}

Tensor gated_l1_loss(const std::vector<RedundantCountMap>& preds,
                     const std::vector<RedundantCountMap>& gts, double s,
                     const BranchThresholds& thresholds) {
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("gated_l1_loss: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(gts.size()) + " targets");
  }
  if (preds.size() != thresholds.branch_count()) {
    throw std::invalid_argument("gated_l1_loss: expected one map per branch (" +
                                std::to_string(thresholds.branch_count()) + "), got " +
                                std::to_string(preds.size()));
  }
  for (std::size_t b = 0; b < preds.size(); ++b) {
    if (!(preds[b].geometry == gts[b].geometry) || preds[b].values.shape() != gts[b].values.shape()) {
      throw std::invalid_argument("gated_l1_loss: geometry mismatch on branch " + std::to_string(b));
    }
  }
  const std::size_t sel = select_branch(s, thresholds);
  return mean(abs(sub(preds[sel].values, gts[sel].values.detach())));
}

AnnotatedImage mosaic_augment(const AnnotatedImage& current,
                              const std::vector<const AnnotatedImage*>& pool,
                              std::mt19937_64& rng, const MosaicOptions& opts) {
  std::vector<const AnnotatedImage*> others;
  for (const auto* a : pool)
    if (a != nullptr && a->category != current.category && !a->raster.empty()) others.push_back(a);
  if (others.empty() || current.raster.empty()) return current;
  const int q = opts.size / 2;
  if (q < 1 || current.width < q || current.height < q) return current;

  std::uniform_int_distribution<int> ox_d(0, current.width - q), oy_d(0, current.height - q);
  int ox = -1, oy = -1;
  for (int attempt = 0; attempt < opts.placement_retries; ++attempt) {
    const int x = ox_d(rng), y = oy_d(rng);
    bool inside = true;
    for (const auto& b : current.boxes) {
      if (b.ix1() < x || b.iy1() < y || b.ix2() > x + q || b.iy2() > y + q) {
        inside = false;
        break;
      }
    }
    if (inside) {
      ox = x;
      oy = y;
      break;
    }
  }
  if (ox < 0) return current;

  const int quadrant = std::uniform_int_distribution<int>(0, 3)(rng);
  AnnotatedImage out;
  out.image_path = current.image_path;
  out.category = current.category;
  out.width = out.height = 2 * q;
  out.raster = Image(2 * q, 2 * q);
  auto blit = [&](const Image& src, int qi) {
    const int dx = (qi % 2) * q, dy = (qi / 2) * q;
    for (int y = 0; y < q; ++y)
      std::copy_n(src.px(0, y), 3 * q, out.raster.px(dx, y + dy));
  };
  for (int qi = 0; qi < 4; ++qi) {
    if (qi == quadrant) {
      blit(crop(current.raster, ox, oy, q, q), qi);
      continue;
    }
    const auto* o = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
    const int px = std::uniform_int_distribution<int>(0, std::max(0, o->width - q))(rng);
    const int py = std::uniform_int_distribution<int>(0, std::max(0, o->height - q))(rng);
    blit(crop(o->raster, px, py, q, q), qi);
  }
  const double tx = (quadrant % 2) * q - ox, ty = (quadrant / 2) * q - oy;
  for (const auto& p : current.points) {
    if (p.x >= ox && p.x < ox + q && p.y >= oy && p.y < oy + q) out.points.push_back({p.x + tx, p.y + ty});
  }
  for (const auto& b : current.boxes) out.boxes.push_back({b.x1 + tx, b.y1 + ty, b.x2 + tx, b.y2 + ty});
  return out;
}

}  // namespace lcount
