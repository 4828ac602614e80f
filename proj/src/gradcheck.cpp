#include "lcount/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lcount {

GradReport grad_check(const std::string& name, const std::function<Tensor()>& f,
                      std::vector<Tensor> params, const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0 && opts.eps <= 1e-2)) {
    throw std::invalid_argument("grad_check: eps must lie in (0, 1e-2]");
  }
  GradReport report;
  report.op_name = name;

  for (auto& p : params) p.zero_grad();
  const Tensor out = f();
  if (out.numel() != 1) throw ShapeError("grad_check: f must return a scalar");
  if (!std::isfinite(out.item())) {
    report.failure = "non-finite value of f at the base point";
    return report;
  }
  out.backward();

  std::mt19937_64 rng(opts.sample_seed);
  auto eval = [&]() {
    NoGradGuard guard;
    return f().item();
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    const std::vector<double> analytic =
        p.grad().empty() ? std::vector<double>(p.numel(), 0.0)
                         : std::vector<double>(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.max_coords_per_param);
    }
    auto data = p.mutable_data();
    for (std::size_t c : coords) {
      const double orig = data[c];
      data[c] = orig + opts.eps;
      const double fp = eval();
      data[c] = orig - opts.eps;
      const double fm = eval();
      data[c] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        report.failure = "non-finite value of f when perturbing parameter " +
                         std::to_string(pi) + " coordinate " + std::to_string(c);
        report.passed = false;
        return report;
      }
      const double numeric = (fp - fm) / (2.0 * opts.eps);
      const double a = analytic[c];
      const double abs_err = std::fabs(a - numeric);
      const double denom = std::max({std::fabs(a), std::fabs(numeric), opts.denom_floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (abs_err / denom > report.max_rel_error || report.coords_checked == 0) {
        report.max_rel_error = abs_err / denom;
        report.worst_param = pi;
        report.worst_coord = c;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
      ++report.coords_checked;
    }
  }
  report.passed = report.max_rel_error < opts.rel_tol;
  return report;
}

}  // namespace lcount
