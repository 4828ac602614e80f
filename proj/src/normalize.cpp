#include "lcount/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lcount/tensor.hpp"

namespace lcount {

namespace {

// Window indices j along one axis whose footprint [j*zp, j*zp + kp) holds t.
std::pair<long, long> covering_range(long t, long kp, long zp, long n_windows) {
  const long lo_num = t - kp + 1;
  const long lo = lo_num <= 0 ? 0 : (lo_num + zp - 1) / zp;
  const long hi = std::min(t / zp, n_windows - 1);
  return {lo, hi};
}

}  // namespace

Grid coverage_frequency(const WindowGeometry& g) {
  Grid f(g.grid_h, g.grid_w);
  for (long ty = 0; ty < g.grid_h; ++ty) {
    const auto [y0, y1] = covering_range(ty, g.kp, g.zp, g.out_h);
    for (long tx = 0; tx < g.grid_w; ++tx) {
      const auto [x0, x1] = covering_range(tx, g.kp, g.zp, g.out_w);
      f.at(ty, tx) = (y1 >= y0 && x1 >= x0) ? static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1)) : 0.0;
    }
  }
  return f;
}

NormalizedCountMap normalize(const Grid& redundant, const WindowGeometry& g) {
  if (static_cast<long>(redundant.rows) != g.out_h || static_cast<long>(redundant.cols) != g.out_w) {
    throw std::invalid_argument("normalize: redundant map " + std::to_string(redundant.rows) + "x" +
                                std::to_string(redundant.cols) + " does not match window grid " +
                                std::to_string(g.out_h) + "x" + std::to_string(g.out_w));
  }
  const double area = static_cast<double>(g.kp * g.kp);
  std::vector<double> spread(redundant.size());
  for (std::size_t i = 0; i < spread.size(); ++i) spread[i] = redundant.values[i] / area;

  NormalizedCountMap out;
  out.values = Grid(g.grid_h, g.grid_w);
  for (long ty = 0; ty < g.grid_h; ++ty) {
    const auto [y0, y1] = covering_range(ty, g.kp, g.zp, g.out_h);
    for (long tx = 0; tx < g.grid_w; ++tx) {
      const auto [x0, x1] = covering_range(tx, g.kp, g.zp, g.out_w);
      if (y1 < y0 || x1 < x0) continue;
      double acc = 0.0;
      for (long jy = y0; jy <= y1; ++jy)
        for (long jx = x0; jx <= x1; ++jx) acc += spread[jy * g.out_w + jx];
      const double freq = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
      out.values.at(ty, tx) = acc / freq;
    }
  }
  out.total = out.values.sum();
  return out;
}

NormalizedCountMap normalize(const RedundantCountMap& r) {
  const auto& g = r.geometry;
  return normalize(Grid(g.out_h, g.out_w, r.values.values()), g);
}

double image_count(const NormalizedCountMap& c) { return c.total; }

std::size_t top_count(double total, double magnitude, std::size_t cells) {
  const double raw = total * magnitude;
  if (!(raw > 0.0)) return 0;
  const double rounded = std::floor(raw + 0.5);
  return rounded >= static_cast<double>(cells) ? cells : static_cast<std::size_t>(rounded);
}

VisualizationMap visualize(const NormalizedCountMap& c, const Grid& match_map, double magnitude,
                           VisualMode mode) {
  Grid counts = c.values;
  if (counts.rows != match_map.rows || counts.cols != match_map.cols) {
    const Tensor src({counts.rows, counts.cols, 1}, counts.values);
    counts = Grid(match_map.rows, match_map.cols,
                  interpolate_bilinear(src, match_map.rows, match_map.cols).values());
  }
  VisualizationMap v;
  v.mode = mode;
  v.n_top = top_count(c.total, magnitude, match_map.size());
  v.hint = Grid(match_map.rows, match_map.cols);
  std::vector<std::size_t> order(match_map.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return match_map.values[a] > match_map.values[b];
  });
  for (std::size_t i = 0; i < v.n_top; ++i) v.hint.values[order[i]] = 1.0;
  if (mode == VisualMode::kDetection) {
    v.overlay = v.hint;
  } else {
    v.overlay = Grid(match_map.rows, match_map.cols);
    for (std::size_t i = 0; i < v.overlay.size(); ++i) {
      v.overlay.values[i] = v.hint.values[i] * counts.values[i];
    }
  }
  return v;
}

Image render_overlay(const Grid& overlay, VisualMode mode, const Image& base,
                     const RenderOptions& opts) {
  if (base.empty() || overlay.size() == 0) throw std::invalid_argument("render: empty input");
  Grid up;
  if (mode == VisualMode::kDetection) {
    up = Grid(base.height, base.width);
    for (int y = 0; y < base.height; ++y) {
      const std::size_t r = static_cast<std::size_t>(y) * overlay.rows / base.height;
      for (int x = 0; x < base.width; ++x) {
        const std::size_t c = static_cast<std::size_t>(x) * overlay.cols / base.width;
        up.at(y, x) = overlay.at(r, c);
      }
    }
  } else {
    const Tensor src({overlay.rows, overlay.cols, 1}, overlay.values);
    up = Grid(base.height, base.width,
              interpolate_bilinear(src, base.height, base.width).values());
  }
  double peak = 0.0;
  for (double v : up.values) peak = std::max(peak, v);
  Image out = base;
  if (!(peak > 0.0)) return out;
  for (int y = 0; y < base.height; ++y)
    for (int x = 0; x < base.width; ++x) {
      const double w = std::max(0.0, up.at(y, x)) / peak;
      if (w <= 0.0) continue;
      const double a = opts.opacity * w;
      auto* p = out.px(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = p[ch] * (1.0 - a) + opts.color[ch] * a;
        p[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  return out;
}

void render(const Grid& overlay, VisualMode mode, const Image& base,
            const std::filesystem::path& path, const RenderOptions& opts) {
  save_png(render_overlay(overlay, mode, base, opts), path);
}

}  // namespace lcount
