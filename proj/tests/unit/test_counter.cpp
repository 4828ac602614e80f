#include <gtest/gtest.h>

#include <random>
#include <set>

#include "lcount/counter.hpp"
#include "lcount/model.hpp"
#include "oracles.hpp"

using namespace lcount;

namespace {

Tensor random_enhanced(std::size_t h, std::size_t w, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(h * w * c);
  for (double& x : v) x = u(rng);
  return Tensor({h, w, c}, std::move(v));
}

}  // namespace

TEST(WindowGrid, TabulatedCounts) {
  EXPECT_EQ(window_grid(24, 24, 2, 1).size(), 529u);
  EXPECT_EQ(window_grid(24, 24, 8, 1).size(), 289u);
  EXPECT_EQ(window_grid(24, 24, 1, 1).size(), 576u);
}

TEST(WindowGrid, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<long> dim(1, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const long h = dim(rng), w = dim(rng);
    const long kp = std::uniform_int_distribution<long>(1, std::min(h, w))(rng);
    const long zp = std::uniform_int_distribution<long>(1, kp + 2)(rng);
    const auto got = window_grid(h, w, kp, zp);
    const auto ref = oracle::enumerate_windows(h, w, kp, zp);
    ASSERT_EQ(got.size(), ref.size()) << h << "x" << w << " kp " << kp << " zp " << zp;
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].ty, ref[i].first);
      EXPECT_EQ(got[i].tx, ref[i].second);
      EXPECT_EQ(got[i].ty, got[i].jy * zp);
    }
  }
}

TEST(WindowGrid, OversizedWindowRejected) {
  EXPECT_THROW(window_grid(4, 8, 5, 1), std::invalid_argument);
  EXPECT_THROW(make_window_geometry(48, 16, 16, 2, 8), std::invalid_argument);
  EXPECT_THROW(make_window_geometry(40, 16, 16, 8, 8), std::invalid_argument);
}

TEST(Overlap, TabulatedCases) {
  const WindowGeometry g2 = make_window_geometry(32, 16, 16, 8, 8);
  const auto w = window_grid(8, 8, 2, 1);
  const TokenRect r = redundancy_overlap(w[0], w[1], g2);
  EXPECT_EQ(r.y1 - r.y0, 2);
  EXPECT_EQ(r.x1 - r.x0, 1);

  const WindowGeometry tiling = make_window_geometry(32, 32, 16, 8, 8);
  const auto t = window_grid(8, 8, 2, 2);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size(); ++j) EXPECT_TRUE(redundancy_overlap(t[i], t[j], tiling).empty());

  const WindowGeometry g8 = make_window_geometry(128, 16, 16, 24, 24);
  const Window a{0, 0, 0, 0}, b{0, 3, 0, 3};
  EXPECT_EQ(redundancy_overlap(a, b, g8).area(), 40);
}

TEST(Overlap, MatchesSetIntersectionAndAdjacencyBound) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const long kp = std::uniform_int_distribution<long>(1, 6)(rng);
    const long zp = std::uniform_int_distribution<long>(1, kp)(rng);
    const WindowGeometry g = make_window_geometry(16 * kp, 16 * zp, 16, 16, 16);
    const auto ws = window_grid(16, 16, kp, zp);
    std::uniform_int_distribution<std::size_t> pick(0, ws.size() - 1);
    for (int k = 0; k < 20; ++k) {
      const Window a = ws[pick(rng)], b = ws[pick(rng)];
      std::set<std::pair<long, long>> sa, shared;
      for (long y = a.ty; y < a.ty + kp; ++y)
        for (long x = a.tx; x < a.tx + kp; ++x) sa.insert({y, x});
      for (long y = b.ty; y < b.ty + kp; ++y)
        for (long x = b.tx; x < b.tx + kp; ++x)
          if (sa.count({y, x})) shared.insert({y, x});
      const TokenRect r = redundancy_overlap(a, b, g);
      EXPECT_EQ(static_cast<std::size_t>(r.area()), shared.size());
      // Non-empty iff the window indices differ by less than ceil(kp/zp) on both axes.
      const long reach = (kp + zp - 1) / zp;
      const bool near = std::abs(a.jy - b.jy) < reach && std::abs(a.jx - b.jx) < reach;
      EXPECT_EQ(!shared.empty(), near);
    }
  }
}

TEST(CountBranch, ZeroInputZeroBiasGivesZeroMap) {
  ParameterSet ps;
  std::mt19937_64 rng(1);
  BranchCounter b(0, 8, ps, rng);
  const WindowGeometry g = make_window_geometry(32, 16, 16, 6, 6);
  const auto m = count_branch(Tensor({6, 6, 9}), b, g, true);
  EXPECT_EQ(m.values.shape(), (Shape{5, 5}));
  for (double v : m.values.data()) EXPECT_EQ(v, 0.0);
}

TEST(CountBranch, MatchesNaiveWindowLoop) {
  ParameterSet ps;
  std::mt19937_64 rng(2);
  const std::size_t dim = 6;
  BranchCounter b(0, dim, ps, rng);
  auto bias = ps.get("branch.0.head.bias").mutable_data();
  bias[0] = 0.3;
  const Tensor x = random_enhanced(7, 9, dim + 1, rng);
  const WindowGeometry g = make_window_geometry(48, 32, 16, 7, 9);
  const auto got = count_branch(x, b, g, false).values.values();

  auto conv = oracle::conv2d(x.data(), 7, 9, dim + 1, b.slack_weight().data(), b.slack_bias().data(), dim, 3);
  for (double& v : conv) v = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
  const auto w = b.head_weight().data();
  ASSERT_EQ(got.size(), static_cast<std::size_t>(g.out_h * g.out_w));
  for (long jy = 0; jy < g.out_h; ++jy)
    for (long jx = 0; jx < g.out_w; ++jx) {
      double head = 0.3;
      for (std::size_t c = 0; c < dim; ++c) {
        double avg = 0;
        for (long y = jy * 2; y < jy * 2 + 3; ++y)
          for (long xx = jx * 2; xx < jx * 2 + 3; ++xx) avg += conv[(y * 9 + xx) * dim + c];
        head += avg / 9 * w[c];
      }
      EXPECT_NEAR(got[jy * g.out_w + jx], head, 1e-10);
    }
}

TEST(CountBranch, RectifiedOutputIsNonNegative) {
  ParameterSet ps;
  std::mt19937_64 rng(3);
  BranchCounter b(0, 4, ps, rng);
  ps.get("branch.0.head.bias").mutable_data()[0] = -0.5;
  const WindowGeometry g = make_window_geometry(32, 16, 16, 5, 5);
  for (int i = 0; i < 10; ++i) {
    const auto m = count_branch(random_enhanced(5, 5, 5, rng), b, g, true);
    for (double v : m.values.data()) EXPECT_GE(v, 0.0);
  }
}

TEST(CountBranch, LargestBranchShapeOnDefaultGrid) {
  ParameterSet ps;
  std::mt19937_64 rng(4);
  BranchCounter b(2, 4, ps, rng);
  const WindowGeometry g = make_window_geometry(128, 16, 16, 24, 24);
  EXPECT_EQ(count_branch(Tensor({24, 24, 5}), b, g, false).values.shape(), (Shape{17, 17}));
}

TEST(CountBranch, TranslationCovariance) {
  ParameterSet ps;
  std::mt19937_64 rng(6);
  BranchCounter b(0, 4, ps, rng);
  const Tensor big = random_enhanced(12, 12, 5, rng);
  const Tensor shifted = slice(big, 1, 1, 12);
  const auto full = count_branch(big, b, make_window_geometry(32, 16, 16, 12, 12), false).values.values();
  const auto part = count_branch(shifted, b, make_window_geometry(32, 16, 16, 12, 11), false).values.values();
  // Shifting by z_p = 1 token moves every window one cell; the shifted grid's
  // first column sees zero padding where the original saw data, so skip it.
  for (long jy = 0; jy < 11; ++jy)
    for (long jx = 1; jx < 10; ++jx) EXPECT_NEAR(part[jy * 10 + jx], full[jy * 11 + jx + 1], 1e-10);
}

TEST(MultiBranch, TrainEvaluatesAllInferSelectsOne) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  Image img(128, 128, 100);
  const auto out_train = model.forward(img, make_exemplar_set(img, std::vector<ExemplarBox>{{0, 0, 20, 20}}, 32),
                                       CountMode::kTrain);
  ASSERT_EQ(out_train.maps.size(), 3u);
  EXPECT_EQ(out_train.maps[0].geometry.k, 32);
  EXPECT_EQ(out_train.maps[1].geometry.k, 64);
  EXPECT_EQ(out_train.maps[2].geometry.k, 128);
  for (const auto& m : out_train.maps) EXPECT_EQ(m.geometry.z, 16);

  const auto infer_small = model.forward(
      img, make_exemplar_set(img, std::vector<ExemplarBox>{{0, 0, 20, 20}}, 32), CountMode::kInfer);
  ASSERT_EQ(infer_small.maps.size(), 1u);
  EXPECT_EQ(infer_small.maps[0].geometry.k, 32);
  EXPECT_EQ(infer_small.maps[0].branch, 0u);

  const auto infer_large = model.forward(
      img, make_exemplar_set(img, std::vector<ExemplarBox>{{0, 0, 120, 110}}, 32), CountMode::kInfer);
  ASSERT_EQ(infer_large.maps.size(), 1u);
  EXPECT_EQ(infer_large.maps[0].geometry.k, 128);
}

TEST(MultiBranch, PerturbingOneBranchLeavesOthersBitIdentical) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  std::mt19937_64 rng(7);
  Image img(128, 128);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  const auto ex = make_exemplar_set(img, std::vector<ExemplarBox>{{4, 4, 30, 30}}, 32);
  const auto before = model.forward(img, ex, CountMode::kTrain);
  for (const Tensor& t : model.branches()[1].parameters()) {
    Tensor p = t;
    for (double& v : p.mutable_data()) v += 0.25;
  }
  const auto after = model.forward(img, ex, CountMode::kTrain);
  EXPECT_TRUE(oracle::bit_equal(before.maps[0].values.data(), after.maps[0].values.data()));
  EXPECT_TRUE(oracle::bit_equal(before.maps[2].values.data(), after.maps[2].values.data()));
  EXPECT_FALSE(oracle::bit_equal(before.maps[1].values.data(), after.maps[1].values.data()));
}
