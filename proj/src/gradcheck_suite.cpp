#include <random>

#include "lcount/dataset.hpp"
#include "lcount/gradcheck.hpp"
#include "lcount/model.hpp"
#include "lcount/training.hpp"

namespace lcount {

Tensor faulty_square(const Tensor& x) {
  std::vector<double> v(x.data().begin(), x.data().end());
  for (auto& e : v) e *= e;
  return Tensor::make_op(x.shape(), std::move(v), {x},
                         [](detail::Node& n) {
                           auto& in = *n.parents[0];
                           if (!in.requires_grad) return;
                           in.ensure_grad();
                           for (std::size_t i = 0; i < n.grad.size(); ++i) {
                             in.grad[i] += 2.2 * in.data[i] * n.grad[i];
                           }
                         },
                         "faulty_square");
}

namespace {

// Values bounded away from zero so relu/abs are evaluated off their kinks.
Tensor random_input(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) {
    do e = u(rng);
    while (std::abs(e) < 0.05);
  }
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor cotangent(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = u(rng);
  return Tensor(shape, std::move(v), false);
}

using Check = std::function<GradReport(std::mt19937_64&, const GradCheckOptions&)>;

// Checks op(inputs) . w for a fixed random cotangent w.
GradReport projected(const std::string& name, std::vector<Tensor> inputs,
                     const std::function<Tensor(const std::vector<Tensor>&)>& op,
                     std::mt19937_64& rng, const GradCheckOptions& opts) {
  Shape out_shape;
  {
    NoGradGuard g;
    out_shape = op(inputs).shape();
  }
  const Tensor w = cotangent(out_shape, rng);
  return grad_check(name, [&] { return sum(mul(op(inputs), w)); }, inputs, opts);
}

std::vector<std::pair<std::string, Check>> op_checks(bool inject_bug) {
  std::vector<std::pair<std::string, Check>> c;
  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> f, Shape s) {
    c.emplace_back(name, [=](std::mt19937_64& rng, const GradCheckOptions& o) {
      return projected(name, {random_input(s, rng)}, [&](const auto& in) { return f(in[0]); }, rng, o);
    });
  };
  auto binary = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> f,
                    Shape a, Shape b) {
    c.emplace_back(name, [=](std::mt19937_64& rng, const GradCheckOptions& o) {
      return projected(name, {random_input(a, rng), random_input(b, rng)},
                       [&](const auto& in) { return f(in[0], in[1]); }, rng, o);
    });
  };
  binary("add", [](auto& a, auto& b) { return add(a, b); }, {3, 4}, {3, 4});
  binary("add(broadcast)", [](auto& a, auto& b) { return add(a, b); }, {3, 4}, {4});
  binary("sub(broadcast)", [](auto& a, auto& b) { return sub(a, b); }, {2, 3, 4}, {3, 1});
  binary("mul", [](auto& a, auto& b) { return mul(a, b); }, {3, 4}, {3, 4});
  binary("mul(broadcast)", [](auto& a, auto& b) { return mul(a, b); }, {4, 1}, {1, 5});
  unary("scale", [](auto& a) { return scale(a, -1.7); }, {3, 4});
  unary("add_scalar", [](auto& a) { return add_scalar(a, 0.3); }, {3, 4});
  unary("relu", [](auto& a) { return relu(a); }, {4, 5});
  unary("gelu", [](auto& a) { return gelu(scale(a, 3.0)); }, {4, 5});
  unary("abs", [](auto& a) { return abs(a); }, {4, 5});
  unary("sum", [](auto& a) { return sum(a); }, {3, 4});
  unary("mean", [](auto& a) { return mean(a); }, {3, 4});
  unary("mean_rows", [](auto& a) { return mean_rows(a); }, {5, 3});
  binary("matmul", [](auto& a, auto& b) { return matmul(a, b); }, {3, 5}, {5, 4});
  unary("transpose", [](auto& a) { return transpose(a); }, {3, 5});
  unary("softmax_rows", [](auto& a) { return softmax_rows(scale(a, 2.0), 1.0); }, {4, 6});
  unary("softmax_rows(temperature)", [](auto& a) { return softmax_rows(a, 0.5); }, {4, 6});
  c.emplace_back("layernorm", [](std::mt19937_64& rng, const GradCheckOptions& o) {
    return projected("layernorm", {random_input({4, 6}, rng, -2, 2), random_input({6}, rng), random_input({6}, rng)},
                     [](const auto& in) { return layernorm(in[0], in[1], in[2]); }, rng, o);
  });
  c.emplace_back("conv2d", [](std::mt19937_64& rng, const GradCheckOptions& o) {
    return projected("conv2d", {random_input({5, 4, 3}, rng), random_input({27, 2}, rng), random_input({2}, rng)},
                     [](const auto& in) { return conv2d(in[0], in[1], in[2], 3); }, rng, o);
  });
  unary("avg_pool2d", [](auto& a) { return avg_pool2d(a, 3, 2); }, {7, 8, 2});
  unary("avg_pool2d(window=grid)", [](auto& a) { return avg_pool2d(a, 4, 1); }, {4, 4, 3});
  unary("reshape", [](auto& a) { return reshape(a, {6, 2}); }, {3, 4});
  binary("concat(axis0)", [](auto& a, auto& b) { return concat({a, b}, 0); }, {2, 3}, {4, 3});
  binary("concat(axis1)", [](auto& a, auto& b) { return concat({a, b}, 1); }, {3, 2}, {3, 1});
  unary("slice", [](auto& a) { return slice(a, 0, 1, 3); }, {4, 3});
  unary("slice(axis1)", [](auto& a) { return slice(a, 1, 2, 5); }, {3, 6});
  if (inject_bug) unary("faulty_square", [](auto& a) { return faulty_square(a); }, {3, 4});
  return c;
}

GradReport model_check(std::uint64_t seed, std::size_t coords, const GradCheckOptions& opts) {
  ModelConfig mc = ModelConfig::tiny();
  mc.init_seed = seed;
  Model model(mc);
  SynthConfig sc;
  sc.width = sc.height = static_cast<int>(mc.image_size);
  sc.seed = seed;
  const AnnotatedImage scene = synth_scene(sc);
  TrainConfig tc = TrainConfig::tiny();
  tc.mosaic_prob = 0.0;
  std::mt19937_64 rng(seed);
  const PreparedSample sample = prepare_sample(scene, {}, model, tc, rng);
  GradCheckOptions o = opts;
  o.max_coords_per_param = coords;
  o.sample_seed = seed;
  return grad_check("tiny model gated loss", [&] { return sample_loss(model, sample, tc); },
                    model.params().tensors(), o);
}

}  // namespace

std::vector<GradReport> run_gradcheck_suite(const GradSuiteOptions& opts) {
  std::vector<GradReport> out;
  const auto checks = op_checks(opts.inject_bug);
  for (std::uint64_t seed : opts.seeds) {
    std::mt19937_64 rng(seed);
    for (const auto& [name, check] : checks) {
      GradReport r = check(rng, opts.check);
      r.op_name = name + " seed " + std::to_string(seed);
      out.push_back(std::move(r));
    }
    GradReport r = model_check(seed, opts.model_coords, opts.check);
    r.op_name += " seed " + std::to_string(seed);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace lcount
