#pragma once

// Token-level local counting windows and the multi-branch counter.
//
// A branch with block size k and stride z counts inside k_p x k_p token
// windows placed every z_p tokens (k = p k_p, z = p z_p). Windows never leave
// the token grid, so the redundant map has
//   ((H_t - k_p) / z_p + 1) x ((W_t - k_p) / z_p + 1)
// cells.

#include <cstddef>
#include <random>
#include <vector>

#include "lcount/config.hpp"
#include "lcount/geometry.hpp"
#include "lcount/params.hpp"
#include "lcount/tensor.hpp"

namespace lcount {

struct WindowGeometry {
  long k = 0;      // block size, px
  long z = 0;      // output stride, px
  long patch = 0;  // token size, px
  long kp = 0;     // block size, tokens
  long zp = 0;     // stride, tokens
  long grid_h = 0;  // token grid the windows slide over
  long grid_w = 0;
  long out_h = 0;  // window grid
  long out_w = 0;

  std::size_t window_count() const { return static_cast<std::size_t>(out_h * out_w); }
  bool operator==(const WindowGeometry&) const = default;
};

/// Validates k, z against the patch size and the grid extent.
WindowGeometry make_window_geometry(long k, long z, long patch, long grid_h, long grid_w);

/// Top-left token of a window plus its (row, col) index in the window grid.
struct Window {
  long jy = 0, jx = 0;  // window grid index
  long ty = 0, tx = 0;  // top-left token
  bool operator==(const Window&) const = default;
};

/// Row-major enumeration of every window of size kp with stride zp that fits
/// inside a grid_h x grid_w token grid. Rejects kp larger than the grid.
std::vector<Window> window_grid(long grid_h, long grid_w, long kp, long zp);

/// Half-open token rectangle [y0, y1) x [x0, x1); empty when y0 >= y1 or x0 >= x1.
struct TokenRect {
  long y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  bool empty() const { return y0 >= y1 || x0 >= x1; }
  long area() const { return empty() ? 0 : (y1 - y0) * (x1 - x0); }
};

/// Tokens shared by windows a and b of the same geometry.
TokenRect redundancy_overlap(const Window& a, const Window& b, const WindowGeometry& g);

/// Local counts of one branch over its window grid.
struct RedundantCountMap {
  Tensor values;  // [out_h x out_w]
  WindowGeometry geometry;
  std::size_t branch = 0;
};

/// Per-branch parameters: a 3x3 slack convolution (dim+1 -> dim) and a
/// linear head (dim -> 1) applied after window average pooling.
class BranchCounter {
 public:
  BranchCounter(std::size_t index, long dim, ParameterSet& params, std::mt19937_64& rng);

  std::size_t index() const { return index_; }
  const Tensor& slack_weight() const { return slack_w_; }
  const Tensor& slack_bias() const { return slack_b_; }
  const Tensor& head_weight() const { return head_w_; }
  const Tensor& head_bias() const { return head_b_; }
  std::vector<Tensor> parameters() const { return {slack_w_, slack_b_, head_w_, head_b_}; }

 private:
  std::size_t index_;
  Tensor slack_w_, slack_b_, head_w_, head_b_;
};

/// slack conv -> GELU -> kp x kp average pool (stride zp) -> linear head,
/// followed by ReLU when `rectify` is set (inference).
RedundantCountMap count_branch(const Tensor& enhanced, const BranchCounter& branch,
                               const WindowGeometry& geometry, bool rectify);

enum class CountMode { kTrain, kInfer };

/// Train mode evaluates every branch without rectification; infer mode
/// evaluates only the branch selected by the exemplar scale prior.
std::vector<RedundantCountMap> count_multibranch(const Tensor& enhanced,
                                                 const ExemplarSet& exemplars,
                                                 const std::vector<BranchCounter>& branches,
                                                 const ModelConfig& cfg, CountMode mode);

/// Geometry of branch `b` over an enhanced map of grid_h x grid_w tokens.
WindowGeometry branch_geometry(const ModelConfig& cfg, std::size_t b, long grid_h, long grid_w);

}  // namespace lcount
