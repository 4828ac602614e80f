#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lcount/normalize.hpp"
#include "lcount/supervision.hpp"
#include "oracles.hpp"

using namespace lcount;
namespace fs = std::filesystem;

namespace {

WindowGeometry geom(long kp, long zp, long gh, long gw) {
  return make_window_geometry(16 * kp, 16 * zp, 16, gh, gw);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST(Normalize, SingleWindowIsUniform) {
  const auto g = geom(4, 1, 4, 4);
  const auto c = normalize(Grid(1, 1, {8.0}), g);
  for (double v : c.values.values) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(c.total, 8.0);
  EXPECT_EQ(image_count(c), 8.0);
}

TEST(Normalize, TilingPreservesTotal) {
  const auto g = geom(2, 2, 6, 8);
  std::mt19937_64 rng(1);
  const Grid r = oracle::random_grid(3, 4, rng, 0, 5);
  const auto c = normalize(r, g);
  EXPECT_NEAR(c.total, r.sum(), 1e-12);
  for (double f : coverage_frequency(g).values) EXPECT_EQ(f, 1.0);
}

TEST(Normalize, MatchesScatterLoopBitExactly) {
  const auto g = geom(4, 1, 12, 12);
  std::mt19937_64 rng(2);
  const Grid r = oracle::random_grid(9, 9, rng, -1, 3);
  const auto c = normalize(r, g);
  EXPECT_TRUE(oracle::bit_equal(c.values.values, oracle::normalize_scatter(r, 12, 12, 4, 1).values));
}

TEST(Normalize, UncoveredTokensAreZero) {
  // kp 2, zp 3 on 7 tokens: windows at 0 and 3, tokens 2, 5, 6 uncovered.
  const auto g = geom(2, 3, 7, 7);
  const auto c = normalize(Grid(2, 2, 1.0), g);
  for (long y = 0; y < 7; ++y)
    for (long x = 0; x < 7; ++x) {
      const bool covered = (y % 3 != 2 && y < 5) && (x % 3 != 2 && x < 5);
      EXPECT_EQ(c.values.at(y, x) != 0.0, covered) << y << "," << x;
    }
}

TEST(Normalize, Linearity) {
  const auto g = geom(3, 1, 10, 9);
  std::mt19937_64 rng(3);
  const Grid r1 = oracle::random_grid(8, 7, rng), r2 = oracle::random_grid(8, 7, rng);
  Grid mix(8, 7);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.values[i] = 2.5 * r1.values[i] - 0.75 * r2.values[i];
  const auto a = normalize(r1, g), b = normalize(r2, g), m = normalize(mix, g);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    EXPECT_NEAR(m.values.values[i], 2.5 * a.values.values[i] - 0.75 * b.values.values[i], 1e-12);
  }
}

TEST(Normalize, ShapeMismatchRejected) {
  EXPECT_THROW(normalize(Grid(3, 3), geom(2, 1, 5, 5)), std::invalid_argument);
}

TEST(ImageCount, ZeroAndUniform) {
  NormalizedCountMap c;
  c.values = Grid(3, 5, 0.0);
  c.total = c.values.sum();
  EXPECT_EQ(image_count(c), 0.0);
  c.values = Grid(3, 5, 0.25);
  c.total = c.values.sum();
  EXPECT_EQ(image_count(c), 0.25 * 15);
}

TEST(ImageCount, SingleInteriorDotConserved) {
  // 256 px image, k = 32, dot far from every border.
  const std::vector<Point> dot{{130.3, 121.7}};
  const auto d = density_from_dots(dot, 256, 256, 16.0);
  const auto g = geom(2, 1, 16, 16);
  EXPECT_NEAR(image_count(normalize(redundant_gt(d, g))), 1.0, 0.01);
}

TEST(TopCount, RoundingAndClamp) {
  EXPECT_EQ(top_count(10, 4, 1000), 40u);
  EXPECT_EQ(top_count(0, 4, 1000), 0u);
  EXPECT_EQ(top_count(2.5, 1, 100), 3u);
  EXPECT_EQ(top_count(2.4999, 1, 100), 2u);
  EXPECT_EQ(top_count(1e9, 1, 64), 64u);
  EXPECT_EQ(top_count(-3, 1, 64), 0u);
}

TEST(Visualize, ZeroCountGivesEmptyHint) {
  NormalizedCountMap c;
  c.values = Grid(4, 4);
  std::mt19937_64 rng(1);
  const auto v = visualize(c, oracle::random_grid(4, 4, rng), 3.0, VisualMode::kDensity);
  EXPECT_EQ(v.n_top, 0u);
  EXPECT_EQ(v.hint.sum(), 0.0);
  EXPECT_EQ(v.overlay.sum(), 0.0);
}

TEST(Visualize, MarksStrictlyLargestCells) {
  Grid match(6, 6, 0.1);
  const std::vector<std::size_t> top{3, 8, 17, 22, 35};
  for (std::size_t i : top) match.values[i] = 1.0 + i;
  NormalizedCountMap c;
  c.values = Grid(6, 6, 5.0 / 36);
  c.total = 5.0;
  const auto v = visualize(c, match, 1.0, VisualMode::kDetection);
  ASSERT_EQ(v.n_top, 5u);
  for (std::size_t i = 0; i < 36; ++i) {
    EXPECT_EQ(v.hint.values[i], std::count(top.begin(), top.end(), i) ? 1.0 : 0.0);
  }
  EXPECT_EQ(v.overlay, v.hint);
}

TEST(Visualize, TiesBrokenByRowMajorIndex) {
  NormalizedCountMap c;
  c.values = Grid(2, 3, 0.5);
  c.total = 3.0;
  const auto v = visualize(c, Grid(2, 3, 1.0), 1.0, VisualMode::kDetection);
  EXPECT_EQ(v.hint, Grid(2, 3, {1, 1, 1, 0, 0, 0}));
}

TEST(Visualize, DensityModeSharesHintAndResizesCounts) {
  std::mt19937_64 rng(4);
  NormalizedCountMap c;
  c.values = oracle::random_grid(4, 4, rng);
  c.total = c.values.sum();
  const Grid match = oracle::random_grid(8, 8, rng);
  const auto det = visualize(c, match, 2.0, VisualMode::kDetection);
  const auto den = visualize(c, match, 2.0, VisualMode::kDensity);
  EXPECT_EQ(det.hint, den.hint);
  for (std::size_t i = 0; i < 64; ++i) {
    if (den.hint.values[i] == 0.0) EXPECT_EQ(den.overlay.values[i], 0.0);
    else EXPECT_GT(den.overlay.values[i], 0.0);
  }
}

TEST(Render, ZeroOverlayLeavesBaseUntouched) {
  Image base(32, 16);
  std::mt19937_64 rng(5);
  for (auto& v : base.rgb) v = static_cast<std::uint8_t>(rng());
  EXPECT_EQ(render_overlay(Grid(2, 2), VisualMode::kDetection, base), base);
  EXPECT_EQ(render_overlay(Grid(2, 2), VisualMode::kDensity, base), base);
}

TEST(Render, NearestUpsamplingGivesBlocks) {
  Image base(32, 32, 0);
  const Grid hint(2, 2, {1, 0, 0, 1});
  RenderOptions o;
  o.opacity = 1.0;
  const Image out = render_overlay(hint, VisualMode::kDetection, base, o);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const bool on = (y < 16) == (x < 16);
      const auto* p = out.px(x, y);
      EXPECT_EQ(p[0], on ? o.color[0] : 0) << x << "," << y;
      EXPECT_EQ(p[1], on ? o.color[1] : 0);
      EXPECT_EQ(p[2], on ? o.color[2] : 0);
    }
}

TEST(Render, ByteDeterministicFiles) {
  const fs::path dir = fs::temp_directory_path() / "lcount_render_test";
  fs::create_directories(dir);
  Image base(48, 48, 40);
  std::mt19937_64 rng(6);
  const Grid overlay = oracle::random_grid(3, 3, rng);
  render(overlay, VisualMode::kDensity, base, dir / "a.png");
  render(overlay, VisualMode::kDensity, base, dir / "b.png");
  EXPECT_EQ(read_bytes(dir / "a.png"), read_bytes(dir / "b.png"));
  EXPECT_EQ(load_image(dir / "a.png"), render_overlay(overlay, VisualMode::kDensity, base));
  fs::remove_all(dir);
}

TEST(Render, UnwritablePathReported) {
  EXPECT_THROW(render(Grid(1, 1, 1.0), VisualMode::kDetection, Image(4, 4), "/nonexistent_dir/x.png"),
               std::runtime_error);
}

TEST(GridText, RoundTripIsExact) {
  std::mt19937_64 rng(7);
  const Grid g = oracle::random_grid(5, 3, rng, -1e6, 1e6);
  std::stringstream ss;
  write_grid_text(g, ss);
  EXPECT_EQ(read_grid_text(ss), g);
  std::string header;
  std::stringstream again;
  write_grid_text(g, again);
  std::getline(again, header);
  EXPECT_EQ(header, "5 3");
}
