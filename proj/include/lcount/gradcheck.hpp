#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lcount/tensor.hpp"

namespace lcount {

struct GradReport {
  std::string op_name;
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  bool passed = false;
  std::size_t coords_checked = 0;
  // Coordinate with the largest relative error.
  std::size_t worst_param = 0;
  std::size_t worst_coord = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Set when the check failed for a reason other than tolerance (e.g. a
  /// non-finite function value); names the parameter and coordinate.
  std::string failure;
};

struct GradCheckOptions {
  double eps = 1e-5;
  double rel_tol = 1e-4;
  /// Gradients smaller than this are compared absolutely: the relative error
  /// denominator is max(|analytic|, |numeric|, denom_floor).
  double denom_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded sample per parameter.
  std::size_t max_coords_per_param = 0;
  std::uint64_t sample_seed = 0;
};

/// Compares backward-pass gradients of the scalar `f` with respect to each
/// tensor in `params` against central differences (f(x+eps)-f(x-eps))/(2 eps).
/// `f` must rebuild its graph on every call and be deterministic.
GradReport grad_check(const std::string& name, const std::function<Tensor()>& f,
                      std::vector<Tensor> params, const GradCheckOptions& opts = {});

}  // namespace lcount

namespace lcount {

struct GradSuiteOptions {
  GradCheckOptions check;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  /// Coordinates sampled per parameter tensor in the full-model check.
  std::size_t model_coords = 8;
  /// Adds an op whose backward pass is deliberately wrong.
  bool inject_bug = false;
};

/// One report per (check, seed): every differentiable op on random inputs,
/// projected onto a random cotangent, plus the gated loss of the tiny model.
std::vector<GradReport> run_gradcheck_suite(const GradSuiteOptions& opts = {});

/// x^2 with a backward pass that is off by 10%; a negative control.
Tensor faulty_square(const Tensor& x);

}  // namespace lcount
