#include <gtest/gtest.h>

#include <random>

#include "lcount/model.hpp"
#include "lcount/supervision.hpp"
#include "oracles.hpp"

using namespace lcount;

namespace {

WindowGeometry pixel_geom(long k, long z, long size) {
  return make_window_geometry(k, z, 16, size / 16, size / 16);
}

AnnotatedImage scene(const std::string& cat, int size, std::uint64_t seed, int n_dots) {
  std::mt19937_64 rng(seed);
  AnnotatedImage a;
  a.image_path = cat + std::to_string(seed) + ".png";
  a.width = a.height = size;
  a.category = cat;
  a.raster = Image(size, size);
  for (auto& v : a.raster.rgb) v = static_cast<std::uint8_t>(rng());
  std::uniform_real_distribution<double> u(0, size);
  for (int i = 0; i < n_dots; ++i) a.points.push_back({u(rng), u(rng)});
  a.boxes.push_back({10, 12, 22, 26});
  return a;
}

}  // namespace

TEST(Density, SigmaRule) {
  EXPECT_EQ(density_sigma(2.0), 1.0);
  EXPECT_EQ(density_sigma(32.0), 8.0);
}

TEST(Density, ZeroDotsZeroMap) {
  const auto d = density_from_dots({}, 20, 10, 8.0);
  EXPECT_EQ(d.dot_count, 0u);
  EXPECT_EQ(d.values.sum(), 0.0);
  EXPECT_EQ(d.values.rows, 10u);
  EXPECT_EQ(d.values.cols, 20u);
}

TEST(Density, InteriorDotHasUnitMass) {
  const std::vector<Point> p{{31.2, 40.9}};
  EXPECT_NEAR(density_from_dots(p, 64, 64, 12.0).values.sum(), 1.0, 1e-12);
}

TEST(Density, BorderDotsKeepMass) {
  const std::vector<Point> p{{0.0, 0.0}, {63.9, 0.5}, {2, 60}, {32, 32}, {63.99, 63.99}, {0.1, 31}, {50, 1}};
  const auto d = density_from_dots(p, 64, 64, 20.0);
  EXPECT_NEAR(d.values.sum(), 7.0, 1e-6);
  EXPECT_EQ(d.dot_count, 7u);
}

TEST(Density, MassHoldsForArbitraryPlacements) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = std::uniform_int_distribution<int>(8, 90)(rng), h = std::uniform_int_distribution<int>(8, 90)(rng);
    std::uniform_real_distribution<double> ux(0, w), uy(0, h), us(1, 60);
    std::vector<Point> p(std::uniform_int_distribution<int>(0, 40)(rng));
    for (auto& q : p) q = {ux(rng), uy(rng)};
    EXPECT_NEAR(density_from_dots(p, w, h, us(rng)).values.sum(), static_cast<double>(p.size()), 1e-6);
  }
}

TEST(Density, OutOfBoundsDotRejectedWithIndex) {
  const std::vector<Point> p{{1, 1}, {5, 5}, {10, 3}};
  try {
    density_from_dots(p, 10, 10, 4.0);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("dot 2"), std::string::npos) << e.what();
  }
}

TEST(RedundantGt, UniformDensity) {
  DensityMap d;
  d.values = Grid(64, 64, 0.01);
  const auto r = redundant_gt(d, pixel_geom(32, 16, 64));
  EXPECT_EQ(r.values.shape(), (Shape{3, 3}));
  for (double v : r.values.data()) EXPECT_NEAR(v, 0.01 * 32 * 32, 1e-10);
}

TEST(RedundantGt, SingleDotInsideWindowMatchesIntegration) {
  const Point dot{40.3, 47.8};
  const auto d = density_from_dots(std::vector<Point>{dot}, 128, 128, 8.0);
  const auto g = pixel_geom(64, 16, 128);
  const auto r = redundant_gt(d, g);
  for (long jy = 0; jy < g.out_h; ++jy)
    for (long jx = 0; jx < g.out_w; ++jx) {
      const int x0 = jx * 16, y0 = jy * 16;
      const double ref = oracle::dot_mass_in_rect(dot, 128, 128, 2.0, 4.0, x0, y0, x0 + 64, y0 + 64);
      EXPECT_NEAR(r.values.at(jy * g.out_w + jx), ref, 1e-12);
    }
  // Window at (16, 16) holds the whole kernel disc (radius 8).
  EXPECT_NEAR(r.values.at(1 * g.out_w + 1), 1.0, 1e-12);
}

TEST(RedundantGt, MonotoneInDots) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 96);
  std::vector<Point> dots;
  const auto g = pixel_geom(32, 16, 96);
  auto prev = redundant_gt(density_from_dots(dots, 96, 96, 10), g).values.values();
  for (int i = 0; i < 10; ++i) {
    dots.push_back({u(rng), u(rng)});
    const auto next = redundant_gt(density_from_dots(dots, 96, 96, 10), g).values.values();
    for (std::size_t j = 0; j < next.size(); ++j) EXPECT_GE(next[j], prev[j] - 1e-12);
    prev = next;
  }
}

TEST(RedundantGt, BlockLargerThanImageRejected) {
  DensityMap d;
  d.values = Grid(32, 32);
  const WindowGeometry g = make_window_geometry(64, 16, 16, 4, 4);
  EXPECT_THROW(redundant_gt(d, g), std::invalid_argument);
}

TEST(GatedLoss, ExamplesAndIsolation) {
  const BranchThresholds t;
  auto map = [](std::vector<double> v, long k, bool grad) {
    const WindowGeometry g = make_window_geometry(k, 16, 16, 8, 8);
    return RedundantCountMap{Tensor({static_cast<std::size_t>(g.out_h), static_cast<std::size_t>(g.out_w)},
                                    std::move(v), grad),
                             g, 0};
  };
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 2);
  std::vector<RedundantCountMap> preds, gts;
  for (long k : {32L, 64L, 128L}) {
    const std::size_t n = static_cast<std::size_t>(std::pow((128 - k) / 16 + 1, 2));
    std::vector<double> p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) q[i] = u(rng), p[i] = q[i] + (k == 64 ? 0.0 : u(rng));
    preds.push_back(map(p, k, true));
    gts.push_back(map(q, k, false));
  }
  // s = 50 selects the k=64 branch, whose prediction is exact.
  EXPECT_EQ(gated_l1_loss(preds, gts, 50, t).item(), 0.0);

  // Constant offset on the selected branch.
  std::vector<double> shifted = gts[1].values.values();
  for (double& v : shifted) v -= 0.375;
  preds[1] = map(shifted, 64, true);
  const Tensor loss = gated_l1_loss(preds, gts, 50, t);
  EXPECT_DOUBLE_EQ(loss.item(), 0.375);
  loss.backward();
  EXPECT_TRUE(preds[0].values.grad().empty());
  EXPECT_TRUE(preds[2].values.grad().empty());
  EXPECT_FALSE(preds[1].values.grad().empty());
}

TEST(GatedLoss, GeometryMismatchRejected) {
  const WindowGeometry a = make_window_geometry(32, 16, 16, 8, 8), b = make_window_geometry(64, 16, 16, 8, 8);
  std::vector<RedundantCountMap> p{{Tensor({7, 7}), a, 0}, {Tensor({5, 5}), b, 1}, {Tensor({1, 1}), a, 2}};
  std::vector<RedundantCountMap> q{{Tensor({7, 7}), a, 0}, {Tensor({5, 5}), b, 1}, {Tensor({7, 7}), a, 2}};
  EXPECT_THROW(gated_l1_loss(p, q, 10, BranchThresholds{}), std::invalid_argument);
}

TEST(GatedLoss, ModelBranchesOutsideTheGateGetNoGradient) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  Image img(128, 128, 77);
  const std::vector<ExemplarBox> boxes{{0, 0, 90, 90}};
  const auto ex = make_exemplar_set(img, boxes, 32);
  const auto fwd = model.forward(img, ex, CountMode::kTrain);
  const auto d = density_from_dots(std::vector<Point>{{64, 64}}, 128, 128, ex.scale_prior);
  std::vector<RedundantCountMap> gts;
  for (const auto& m : fwd.maps) gts.push_back(redundant_gt(d, m.geometry));
  model.params().zero_grad();
  gated_l1_loss(fwd.maps, gts, ex.scale_prior, cfg.thresholds).backward();
  for (std::size_t b = 0; b < 2; ++b)
    for (const Tensor& p : model.branches()[b].parameters())
      for (double g : p.grad()) EXPECT_EQ(g, 0.0);
  double touched = 0;
  for (const Tensor& p : model.branches()[2].parameters())
    for (double g : p.grad()) touched += std::fabs(g);
  EXPECT_GT(touched, 0.0);
}

TEST(Mosaic, EmptyPoolIsIdentity) {
  const auto a = scene("disc/red", 128, 1, 5);
  std::mt19937_64 rng(1);
  const auto out = mosaic_augment(a, {}, rng, {.size = 128});
  EXPECT_EQ(out.raster, a.raster);
  EXPECT_EQ(out.points, a.points);
}

TEST(Mosaic, SameCategoryPoolIsIdentity) {
  const auto a = scene("disc/red", 128, 1, 5), b = scene("disc/red", 128, 2, 5);
  std::mt19937_64 rng(1);
  const auto out = mosaic_augment(a, {&b}, rng, {.size = 128});
  EXPECT_EQ(out.raster, a.raster);
}

TEST(Mosaic, KeepsOnlyTheCurrentRegionDots) {
  const auto a = scene("disc/red", 128, 3, 40);
  const auto b = scene("ellipse/blue", 128, 4, 40), c = scene("cluster/white", 128, 5, 40);
  int augmented = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    std::mt19937_64 rng(seed);
    const auto out = mosaic_augment(a, {&b, &c}, rng, {.size = 128});
    // A failed region search leaves the sample untouched.
    if (out.raster == a.raster) {
      EXPECT_EQ(out.points, a.points);
      continue;
    }
    ++augmented;
    ASSERT_EQ(out.width, 128);
    ASSERT_EQ(out.height, 128);
    ASSERT_EQ(out.boxes.size(), 1u);
    // The exemplar box lies inside the current image's quadrant and moved by
    // the same offset as the retained region.
    const double dx = out.boxes[0].x1 - a.boxes[0].x1, dy = out.boxes[0].y1 - a.boxes[0].y1;
    const int qx = out.boxes[0].x1 >= 64 ? 64 : 0, qy = out.boxes[0].y1 >= 64 ? 64 : 0;
    EXPECT_LE(out.boxes[0].x2, qx + 64);
    EXPECT_LE(out.boxes[0].y2, qy + 64);
    const double sx = qx - dx, sy = qy - dy;  // source region origin
    std::size_t expect = 0;
    for (const auto& p : a.points)
      if (p.x >= sx && p.x < sx + 64 && p.y >= sy && p.y < sy + 64) ++expect;
    EXPECT_EQ(out.points.size(), expect) << "seed " << seed;
    for (const auto& p : out.points) {
      EXPECT_TRUE(p.x >= qx && p.x < qx + 64 && p.y >= qy && p.y < qy + 64);
    }
  }
  EXPECT_GE(augmented, 10);
}

TEST(Mosaic, SeededLayoutIsReproducible) {
  const auto a = scene("disc/red", 128, 6, 20), b = scene("ellipse/blue", 128, 7, 20);
  std::mt19937_64 r1(9), r2(9);
  const auto x = mosaic_augment(a, {&b}, r1, {.size = 128});
  const auto y = mosaic_augment(a, {&b}, r2, {.size = 128});
  EXPECT_EQ(x.raster, y.raster);
  EXPECT_EQ(x.points, y.points);
  EXPECT_EQ(x.boxes, y.boxes);
}

TEST(Mosaic, BoxTooLargeForQuadrantSkipsAugmentation) {
  auto a = scene("disc/red", 128, 8, 10);
  a.boxes = {{0, 0, 100, 100}};
  const auto b = scene("ellipse/blue", 128, 9, 10);
  std::mt19937_64 rng(1);
  const auto out = mosaic_augment(a, {&b}, rng, {.size = 128});
  EXPECT_EQ(out.raster, a.raster);
  EXPECT_EQ(out.points, a.points);
}
