#include "lcount/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace lcount {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

detail::Node& parent(detail::Node& self, std::size_t i) { return *self.parents[i]; }

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

// Index maps from an output element to the contributing element of each
// operand under numpy broadcasting. Empty maps mean identity.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> a_idx;
  std::vector<std::size_t> b_idx;
};

Broadcast plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    return p;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  p.out.assign(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) +
                       " with " + shape_str(b));
    }
    p.out[i] = std::max(da, db);
  }
  auto strides_for = [&](const Shape& s) {
    std::vector<std::size_t> st(rank, 0);
    std::size_t acc = 1;
    for (std::size_t i = s.size(); i-- > 0;) {
      const std::size_t oi = i + (rank - s.size());
      st[oi] = s[i] == 1 ? 0 : acc;
      acc *= s[i];
    }
    return st;
  };
  const auto sa = strides_for(a);
  const auto sb = strides_for(b);
  const std::size_t n = shape_numel(p.out);
  p.a_idx.resize(n);
  p.b_idx.resize(n);
  std::vector<std::size_t> counter(rank, 0);
  std::size_t oa = 0;
  std::size_t ob = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    p.a_idx[flat] = oa;
    p.b_idx[flat] = ob;
    for (std::size_t d = rank; d-- > 0;) {
      ++counter[d];
      oa += sa[d];
      ob += sb[d];
      if (counter[d] < p.out[d]) break;
      oa -= sa[d] * counter[d];
      ob -= sb[d] * counter[d];
      counter[d] = 0;
    }
  }
  return p;
}

template <class Fwd, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                 DA da, DB db) {
  auto plan = std::make_shared<Broadcast>(plan_broadcast(a.shape(), b.shape(), name));
  const std::size_t n = shape_numel(plan->out);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n);
  const bool identity = plan->a_idx.empty();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[identity ? i : plan->a_idx[i]];
    const double y = bv[identity ? i : plan->b_idx[i]];
    out[i] = fwd(x, y);
  }
  return Tensor::make_op(
      plan->out, std::move(out), {a, b},
      [plan, identity, da, db](detail::Node& self) {
        auto& pa = parent(self, 0);
        auto& pb = parent(self, 1);
        const std::size_t n = self.data.size();
        if (pa.requires_grad) {
          auto& g = pa.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ia = identity ? i : plan->a_idx[i];
            const std::size_t ib = identity ? i : plan->b_idx[i];
            g[ia] += self.grad[i] * da(pa.data[ia], pb.data[ib]);
          }
        }
        if (pb.requires_grad) {
          auto& g = pb.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ia = identity ? i : plan->a_idx[i];
            const std::size_t ib = identity ? i : plan->b_idx[i];
            g[ib] += self.grad[i] * db(pa.data[ia], pb.data[ib]);
          }
        }
      },
      name);
}

template <class Fwd, class Deriv>
Tensor unary_op(const Tensor& a, const char* name, Fwd fwd, Deriv deriv) {
  const auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  return Tensor::make_op(
      a.shape(), std::move(out), {a},
      [deriv](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += self.grad[i] * deriv(pa.data[i], self.data[i]);
        }
      },
      name);
}

void require_2d(const Tensor& a, const char* op) {
  require(a.rank() == 2, std::string(op) + ": expected a 2-D tensor, got " +
                             shape_str(a.shape()));
}

void require_hwc(const Tensor& a, const char* op) {
  require(a.rank() == 3, std::string(op) + ": expected an [H x W x C] tensor, got " +
                             shape_str(a.shape()));
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  for (auto d : shape) require(d > 0, "tensor dimensions must be positive: " + shape_str(shape));
  node_ = std::make_shared<detail::Node>();
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape) require(d > 0, "tensor dimensions must be positive: " + shape_str(shape));
  require(values.size() == shape_numel(shape),
          "tensor data length " + std::to_string(values.size()) +
              " does not match shape " + shape_str(shape));
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::make_op(Shape shape, std::vector<double> values,
                       std::vector<Tensor> parents, BackwardFn backward,
                       std::string_view op_name) {
  Tensor out(std::move(shape), std::move(values), false);
  out.node_->op = std::string(op_name);
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& p) { return p.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward = std::move(backward);
  return out;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::dim(std::size_t axis) const { return node_->shape.at(axis); }
std::size_t Tensor::numel() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
std::vector<double> Tensor::values() const { return node_->data; }
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }
const std::string& Tensor::op_name() const { return node_->op; }

double Tensor::item() const {
  require(numel() == 1, "item() needs a single-element tensor, got " + shape_str(shape()));
  return node_->data[0];
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return Tensor(shape(), values(), false); }

void Tensor::backward() const {
  require(numel() == 1, "backward() without a seed needs a scalar, got " + shape_str(shape()));
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) const {
  require(seed.size() == numel(), "backward seed does not match " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS: every node is emitted once, after its parents.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Intermediate buffers start clean so repeated passes over a fresh graph
  // only see this pass's contributions; leaves keep accumulating.
  for (auto* n : order) {
    if (!n->parents.empty()) n->grad.assign(n->data.size(), 0.0);
  }
  auto& g = node_->ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(
      a, "add_scalar", [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  return unary_op(
      a, "gelu",
      [](double x) {
        return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
      },
      [](double x, double) {
        const double u = kGeluC * (x + kGeluA * x * x * x);
        const double t = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      a, "abs", [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_op(
      Shape{1}, {s}, {a},
      [](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (auto& v : g) v += self.grad[0];
      },
      "sum");
}

Tensor mean(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Tensor::make_op(
      Shape{1}, {s * inv}, {a},
      [inv](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (auto& v : g) v += self.grad[0] * inv;
      },
      "mean");
}

Tensor mean_rows(const Tensor& a) {
  require_2d(a, "mean_rows");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const double inv = 1.0 / static_cast<double>(r);
  std::vector<double> out(c, 0.0);
  const auto av = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
  for (auto& v : out) v *= inv;
  return Tensor::make_op(
      Shape{c}, std::move(out), {a},
      [r, c, inv](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j] * inv;
      },
      "mean_rows");
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  require(b.dim(0) == k, "matmul: inner dimensions differ: " + shape_str(a.shape()) +
                             " x " + shape_str(b.shape()));
  std::vector<double> out(m * n);
  MapMat(out.data(), m, n).noalias() =
      CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, n);
  return Tensor::make_op(
      Shape{m, n}, std::move(out), {a, b},
      [m, k, n](detail::Node& self) {
        auto& pa = parent(self, 0);
        auto& pb = parent(self, 1);
        CMapMat g(self.grad.data(), m, n);
        if (pa.requires_grad) {
          MapMat(pa.ensure_grad().data(), m, k).noalias() +=
              g * CMapMat(pb.data.data(), k, n).transpose();
        }
        if (pb.requires_grad) {
          MapMat(pb.ensure_grad().data(), k, n).noalias() +=
              CMapMat(pa.data.data(), m, k).transpose() * g;
        }
      },
      "matmul");
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  MapMat(out.data(), c, r) = CMapMat(a.data().data(), r, c).transpose();
  return Tensor::make_op(
      Shape{c, r}, std::move(out), {a},
      [r, c](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        MapMat(pa.ensure_grad().data(), r, c) +=
            CMapMat(self.grad.data(), c, r).transpose();
      },
      "transpose");
}

Tensor softmax_rows(const Tensor& a, double temperature) {
  require(temperature > 0.0, "softmax_rows: temperature must be positive");
  require(a.rank() >= 1, "softmax_rows: rank-0 input");
  const std::size_t c = a.shape().back();
  const std::size_t r = a.numel() / c;
  const double inv_t = 1.0 / temperature;
  const auto av = a.data();
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av.data() + i * c;
    double* o = out.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      o[j] = std::exp((row[j] - mx) * inv_t);
      z += o[j];
    }
    for (std::size_t j = 0; j < c; ++j) o[j] /= z;
  }
  return Tensor::make_op(
      a.shape(), std::move(out), {a},
      [r, c, inv_t](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
          const double* y = self.data.data() + i * c;
          const double* gy = self.grad.data() + i * c;
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot) * inv_t;
        }
      },
      "softmax_rows");
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = x.shape().back();
  require(gamma.numel() == c && beta.numel() == c,
          "layernorm: affine parameters must have " + std::to_string(c) + " elements");
  const std::size_t r = x.numel() / c;
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  // xhat and 1/sigma per row are kept for the backward pass.
  auto cache = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>();
  auto& xhat = cache->first;
  auto& inv_std = cache->second;
  xhat.resize(x.numel());
  inv_std.resize(r);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[i * c + j] = h;
      out[i * c + j] = h * gv[j] + bv[j];
    }
  }
  return Tensor::make_op(
      x.shape(), std::move(out), {x, gamma, beta},
      [cache, r, c](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pg = parent(self, 1);
        auto& pb = parent(self, 2);
        const auto& xhat = cache->first;
        const auto& inv_std = cache->second;
        if (pg.requires_grad || pb.requires_grad) {
          auto* gg = pg.requires_grad ? pg.ensure_grad().data() : nullptr;
          auto* gb = pb.requires_grad ? pb.ensure_grad().data() : nullptr;
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
              const double gy = self.grad[i * c + j];
              if (gg) gg[j] += gy * xhat[i * c + j];
              if (gb) gb[j] += gy;
            }
        }
        if (px.requires_grad) {
          auto& gx = px.ensure_grad();
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double gh = self.grad[i * c + j] * pg.data[j];
              s1 += gh;
              s2 += gh * xhat[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j) {
              const double gh = self.grad[i * c + j] * pg.data[j];
              gx[i * c + j] += inv_std[i] * (gh - s1 * inv_c - xhat[i * c + j] * s2 * inv_c);
            }
          }
        }
      },
      "layernorm");
}

// ---------------------------------------------------------------------------
// Spatial

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t kernel) {
  require_hwc(x, "conv2d");
  require(kernel % 2 == 1, "conv2d: kernel size must be odd");
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  const std::size_t kk = kernel * kernel * cin;
  require_2d(weight, "conv2d weight");
  require(weight.dim(0) == kk, "conv2d: weight " + shape_str(weight.shape()) +
                                   " does not match input " + shape_str(x.shape()) +
                                   " with kernel " + std::to_string(kernel));
  const std::size_t cout = weight.dim(1);
  require(bias.numel() == cout, "conv2d: bias must have " + std::to_string(cout) + " elements");
  const long pad = static_cast<long>(kernel / 2);

  // im2col: row per output pixel, column per (ky, kx, c) tap.
  auto cols = std::make_shared<std::vector<double>>(h * w * kk, 0.0);
  const auto xv = x.data();
  for (std::size_t oy = 0; oy < h; ++oy)
    for (std::size_t ox = 0; ox < w; ++ox) {
      double* dst = cols->data() + (oy * w + ox) * kk;
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        const long iy = static_cast<long>(oy + ky) - pad;
        if (iy < 0 || iy >= static_cast<long>(h)) continue;
        for (std::size_t kx = 0; kx < kernel; ++kx) {
          const long ix = static_cast<long>(ox + kx) - pad;
          if (ix < 0 || ix >= static_cast<long>(w)) continue;
          const double* src = xv.data() + (static_cast<std::size_t>(iy) * w + ix) * cin;
          std::copy(src, src + cin, dst + (ky * kernel + kx) * cin);
        }
      }
    }
  std::vector<double> out(h * w * cout);
  MapMat om(out.data(), h * w, cout);
  om.noalias() = CMapMat(cols->data(), h * w, kk) * CMapMat(weight.data().data(), kk, cout);
  om.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), cout);

  return Tensor::make_op(
      Shape{h, w, cout}, std::move(out), {x, weight, bias},
      [cols, h, w, cin, cout, kk, kernel, pad](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pw = parent(self, 1);
        auto& pb = parent(self, 2);
        CMapMat g(self.grad.data(), h * w, cout);
        if (pw.requires_grad) {
          MapMat(pw.ensure_grad().data(), kk, cout).noalias() +=
              CMapMat(cols->data(), h * w, kk).transpose() * g;
        }
        if (pb.requires_grad) {
          Eigen::Map<Eigen::RowVectorXd>(pb.ensure_grad().data(), cout) += g.colwise().sum();
        }
        if (px.requires_grad) {
          RowMat dcols = g * CMapMat(pw.data.data(), kk, cout).transpose();
          auto& gx = px.ensure_grad();
          for (std::size_t oy = 0; oy < h; ++oy)
            for (std::size_t ox = 0; ox < w; ++ox) {
              const double* src = dcols.data() + (oy * w + ox) * kk;
              for (std::size_t ky = 0; ky < kernel; ++ky) {
                const long iy = static_cast<long>(oy + ky) - pad;
                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                for (std::size_t kx = 0; kx < kernel; ++kx) {
                  const long ix = static_cast<long>(ox + kx) - pad;
                  if (ix < 0 || ix >= static_cast<long>(w)) continue;
                  double* dst = gx.data() + (static_cast<std::size_t>(iy) * w + ix) * cin;
                  const double* s = src + (ky * kernel + kx) * cin;
                  for (std::size_t c = 0; c < cin; ++c) dst[c] += s[c];
                }
              }
            }
        }
      },
      "conv2d");
}

Tensor avg_pool2d(const Tensor& x, std::size_t window, std::size_t stride) {
  require_hwc(x, "avg_pool2d");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  require(window >= 1 && stride >= 1, "avg_pool2d: window and stride must be positive");
  require(window <= h && window <= w,
          "avg_pool2d: window " + std::to_string(window) + " larger than input " +
              shape_str(x.shape()));
  const std::size_t oh = (h - window) / stride + 1;
  const std::size_t ow = (w - window) / stride + 1;
  const double inv = 1.0 / static_cast<double>(window * window);
  const auto xv = x.data();
  std::vector<double> out(oh * ow * c, 0.0);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* o = out.data() + (oy * ow + ox) * c;
      for (std::size_t dy = 0; dy < window; ++dy)
        for (std::size_t dx = 0; dx < window; ++dx) {
          const double* s = xv.data() + ((oy * stride + dy) * w + ox * stride + dx) * c;
          for (std::size_t ch = 0; ch < c; ++ch) o[ch] += s[ch];
        }
      for (std::size_t ch = 0; ch < c; ++ch) o[ch] *= inv;
    }
  return Tensor::make_op(
      Shape{oh, ow, c}, std::move(out), {x},
      [w, c, oh, ow, window, stride, inv](detail::Node& self) {
        auto& px = parent(self, 0);
        if (!px.requires_grad) return;
        auto& g = px.ensure_grad();
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* go = self.grad.data() + (oy * ow + ox) * c;
            for (std::size_t dy = 0; dy < window; ++dy)
              for (std::size_t dx = 0; dx < window; ++dx) {
                double* d = g.data() + ((oy * stride + dy) * w + ox * stride + dx) * c;
                for (std::size_t ch = 0; ch < c; ++ch) d[ch] += go[ch] * inv;
              }
          }
      },
      "avg_pool2d");
}

Tensor interpolate_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
  require_hwc(x, "interpolate_bilinear");
  require(out_h > 0 && out_w > 0, "interpolate_bilinear: output size must be positive");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
  const auto xv = x.data();
  std::vector<double> out(out_h * out_w * c);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double v00 = xv[(y0 * w + x0) * c + ch];
        const double v01 = xv[(y0 * w + x1) * c + ch];
        const double v10 = xv[(y1 * w + x0) * c + ch];
        const double v11 = xv[(y1 * w + x1) * c + ch];
        out[(oy * out_w + ox) * c + ch] =
            (1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11);
      }
    }
  }
  return Tensor(Shape{out_h, out_w, c}, std::move(out));
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  return Tensor::make_op(
      std::move(shape), a.values(), {a},
      [](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      },
      "reshape");
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    require(p.rank() == first.size(), "concat: rank mismatch " + shape_str(first) + " vs " +
                                          shape_str(p.shape()));
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis) {
        require(p.dim(d) == first[d], "concat: shape mismatch " + shape_str(first) + " vs " +
                                          shape_str(p.shape()));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t row = p.dim(axis) * inner;
    const auto pv = p.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * row, pv.begin() + (o + 1) * row,
                out.begin() + o * out_row + off);
    off += row;
  }
  return Tensor::make_op(
      std::move(out_shape), std::move(out), parts,
      [offsets, outer, inner, out_row](detail::Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          auto& p = parent(self, i);
          if (!p.requires_grad) continue;
          auto& g = p.ensure_grad();
          const std::size_t row = g.size() / outer;
          for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < row; ++j)
              g[o * row + j] += self.grad[o * out_row + offsets[i] + j];
        }
        (void)inner;
      },
      "concat");
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < a.rank(), "slice: axis out of range for " + shape_str(a.shape()));
  require(begin < end && end <= a.dim(axis),
          "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
              ") invalid for axis " + std::to_string(axis) + " of " + shape_str(a.shape()));
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= a.dim(d);
  for (std::size_t d = axis + 1; d < a.rank(); ++d) inner *= a.dim(d);
  const std::size_t in_row = a.dim(axis) * inner;
  const std::size_t out_row = (end - begin) * inner;
  const std::size_t off = begin * inner;
  const auto av = a.data();
  std::vector<double> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy(av.begin() + o * in_row + off, av.begin() + o * in_row + off + out_row,
              out.begin() + o * out_row);
  return Tensor::make_op(
      std::move(out_shape), std::move(out), {a},
      [outer, in_row, out_row, off](detail::Node& self) {
        auto& pa = parent(self, 0);
        if (!pa.requires_grad) return;
        auto& g = pa.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t j = 0; j < out_row; ++j)
            g[o * in_row + off + j] += self.grad[o * out_row + j];
      },
      "slice");
}

}  // namespace lcount
