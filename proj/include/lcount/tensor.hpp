#pragma once

// Dense f64 tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations on tensors that
// require gradients record their parents and a backward closure; calling
// backward() on a scalar result walks the graph once in reverse topological
// order and accumulates partials into every reachable node's grad buffer.
//
// Layout conventions used across the library:
//   * 2-D matrices are row-major [rows x cols].
//   * Spatial feature maps are channel-last [H x W x C].

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lcount {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

/// Raised when operand shapes violate an op's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches the node
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  using BackwardFn = std::function<void(detail::Node& self)>;

  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);

  /// Builds the result node of a custom op. When gradient recording is off
  /// or no parent requires gradients, the parents are not retained.
  static Tensor make_op(Shape shape, std::vector<double> values,
                        std::vector<Tensor> parents, BackwardFn backward,
                        std::string_view op_name);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  std::vector<double> values() const;

  double item() const;
  double at(std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  const std::string& op_name() const;

  /// Seeds d(self)/d(self) = 1 and propagates. Requires a single element.
  void backward() const;
  /// Propagates an explicit upstream gradient of the same shape.
  void backward(std::span<const double> seed) const;

  void zero_grad();

  /// Detached copy: same values, no history, no grad.
  Tensor detach() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// ---------------------------------------------------------------------------
// Elementwise. Binary ops broadcast numpy-style: shapes are right-aligned and
// each dimension must match or be 1 in one operand.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& a);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
Tensor abs(const Tensor& a);

// Reductions to a scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean over rows of a 2-D tensor: [r x c] -> [c].
Tensor mean_rows(const Tensor& a);

// Linear algebra on 2-D tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Row-wise softmax of a / temperature over the last axis.
Tensor softmax_rows(const Tensor& a, double temperature = 1.0);
/// Normalizes over the last axis, then applies gamma * x + beta.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-6);

// Spatial ops on channel-last [H x W x C] maps.

/// Same-size convolution with an odd square kernel, zero padding of K/2.
/// weight: [K*K*C_in x C_out] indexed ((ky*K + kx)*C_in + c, co); bias: [C_out].
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t kernel = 3);
/// Valid-mode average pooling with a square window.
Tensor avg_pool2d(const Tensor& x, std::size_t window, std::size_t stride);
/// Bilinear resize with half-pixel centers. Forward only: the result carries
/// no gradient history.
Tensor interpolate_bilinear(const Tensor& x, std::size_t out_h,
                            std::size_t out_w);

// Shape manipulation.
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin,
             std::size_t end);

}  // namespace lcount
