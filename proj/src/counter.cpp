#include "lcount/counter.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lcount {

WindowGeometry make_window_geometry(long k, long z, long patch, long grid_h, long grid_w) {
  if (patch <= 0) throw std::invalid_argument("window geometry: patch size must be positive");
  if (k < patch || k % patch != 0 || z < patch || z % patch != 0) {
    throw std::invalid_argument("window geometry: (k, z) = (" + std::to_string(k) + ", " +
                                std::to_string(z) + ") must be positive multiples of patch size " +
                                std::to_string(patch));
  }
  WindowGeometry g;
  g.k = k;
  g.z = z;
  g.patch = patch;
  g.kp = k / patch;
  g.zp = z / patch;
  g.grid_h = grid_h;
  g.grid_w = grid_w;
  if (g.kp > grid_h || g.kp > grid_w) {
    throw std::invalid_argument("window geometry: window of " + std::to_string(g.kp) +
                                " tokens exceeds the " + std::to_string(grid_h) + "x" +
                                std::to_string(grid_w) + " token grid");
  }
  g.out_h = (grid_h - g.kp) / g.zp + 1;
  g.out_w = (grid_w - g.kp) / g.zp + 1;
  return g;
}

std::vector<Window> window_grid(long grid_h, long grid_w, long kp, long zp) {
  if (kp < 1 || zp < 1) throw std::invalid_argument("window_grid: kp and zp must be positive");
  if (kp > grid_h || kp > grid_w) {
    throw std::invalid_argument("window_grid: window of " + std::to_string(kp) +
                                " tokens exceeds the " + std::to_string(grid_h) + "x" +
                                std::to_string(grid_w) + " token grid");
  }
  const long oh = (grid_h - kp) / zp + 1;
  const long ow = (grid_w - kp) / zp + 1;
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(oh * ow));
  for (long jy = 0; jy < oh; ++jy)
    for (long jx = 0; jx < ow; ++jx) out.push_back({jy, jx, jy * zp, jx * zp});
  return out;
}

TokenRect redundancy_overlap(const Window& a, const Window& b, const WindowGeometry& g) {
  TokenRect r;
  r.y0 = std::max(a.ty, b.ty);
  r.y1 = std::min(a.ty, b.ty) + g.kp;
  r.x0 = std::max(a.tx, b.tx);
  r.x1 = std::min(a.tx, b.tx) + g.kp;
  if (r.empty()) r = TokenRect{};
  return r;
}

BranchCounter::BranchCounter(std::size_t index, long dim, ParameterSet& params,
                             std::mt19937_64& rng)
    : index_(index) {
  const std::string p = "branch." + std::to_string(index) + ".";
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t taps = 9 * (d + 1);
  slack_w_ = params.add_uniform(p + "slack.weight", {taps, d}, taps, rng);
  slack_b_ = params.add(p + "slack.bias", {d});
  head_w_ = params.add_uniform(p + "head.weight", {d, 1}, d, rng);
  head_b_ = params.add(p + "head.bias", {1});
}

RedundantCountMap count_branch(const Tensor& enhanced, const BranchCounter& branch,
                               const WindowGeometry& geometry, bool rectify) {
  if (enhanced.rank() != 3 || static_cast<long>(enhanced.dim(0)) != geometry.grid_h ||
      static_cast<long>(enhanced.dim(1)) != geometry.grid_w) {
    throw ShapeError("count_branch: features " + shape_str(enhanced.shape()) +
                     " do not match the " + std::to_string(geometry.grid_h) + "x" +
                     std::to_string(geometry.grid_w) + " window geometry");
  }
  if (enhanced.dim(2) * 9 != branch.slack_weight().dim(0)) {
    throw ShapeError("count_branch: feature channels " + std::to_string(enhanced.dim(2)) +
                     " do not match the slack layer " + shape_str(branch.slack_weight().shape()));
  }
  const Tensor adapted = gelu(conv2d(enhanced, branch.slack_weight(), branch.slack_bias(), 3));
  const Tensor pooled = avg_pool2d(adapted, static_cast<std::size_t>(geometry.kp),
                                   static_cast<std::size_t>(geometry.zp));
  const std::size_t windows = geometry.window_count();
  const Tensor flat = reshape(pooled, {windows, pooled.dim(2)});
  Tensor counts = add(matmul(flat, branch.head_weight()), branch.head_bias());
  counts = reshape(counts, {static_cast<std::size_t>(geometry.out_h),
                            static_cast<std::size_t>(geometry.out_w)});
  if (rectify) counts = relu(counts);
  return RedundantCountMap{counts, geometry, branch.index()};
}

WindowGeometry branch_geometry(const ModelConfig& cfg, std::size_t b, long grid_h, long grid_w) {
  return make_window_geometry(cfg.block_sizes.at(b), cfg.output_stride, cfg.patch_size, grid_h,
                              grid_w);
}

std::vector<RedundantCountMap> count_multibranch(const Tensor& enhanced,
                                                 const ExemplarSet& exemplars,
                                                 const std::vector<BranchCounter>& branches,
                                                 const ModelConfig& cfg, CountMode mode) {
  const long gh = static_cast<long>(enhanced.dim(0));
  const long gw = static_cast<long>(enhanced.dim(1));
  std::vector<RedundantCountMap> out;
  if (mode == CountMode::kTrain) {
    for (std::size_t b = 0; b < branches.size(); ++b) {
      out.push_back(count_branch(enhanced, branches[b], branch_geometry(cfg, b, gh, gw), false));
    }
  } else {
    const std::size_t b = select_branch(exemplars.scale_prior, cfg.thresholds);
    out.push_back(count_branch(enhanced, branches.at(b), branch_geometry(cfg, b, gh, gw), true));
  }
  return out;
}

}  // namespace lcount
