#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lcount/encoder.hpp"
#include "lcount/model.hpp"
#include "oracles.hpp"

using namespace lcount;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  Image img(w, h);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(u(rng));
  return img;
}

}  // namespace

TEST(Tokenize, TinyPresetCounts) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  const Image img = random_image(128, 128, 1);
  const std::vector<ExemplarBox> boxes{{10, 10, 30, 34}};
  const auto ex = make_exemplar_set(img, boxes, cfg.exemplar_size);
  const TokenSequence seq = model.encoder().tokenize(img, ex);
  EXPECT_EQ(seq.n_image, 64u);
  EXPECT_EQ(seq.n_exemplar, 4u);
  EXPECT_EQ(seq.total(), 68u);
  EXPECT_EQ(seq.tokens.shape(), (Shape{68, 64}));
}

TEST(Tokenize, DefaultGeometryCounts) {
  ModelConfig cfg;
  cfg.depth = 1;
  cfg.dim = 24;
  cfg.heads = 2;
  Model model(cfg);
  const Image img = random_image(384, 384, 2);
  const std::vector<ExemplarBox> boxes{{0, 0, 40, 40}, {50, 50, 90, 80}, {100, 100, 180, 200}};
  const TokenSequence seq = model.encoder().tokenize(img, make_exemplar_set(img, boxes, 64));
  EXPECT_EQ(seq.n_image, 576u);
  EXPECT_EQ(seq.n_exemplar, 48u);
}

TEST(Tokenize, RejectsUnalignedImage) {
  Model model(ModelConfig::tiny());
  const Image img = random_image(120, 128, 3);
  const std::vector<ExemplarBox> boxes{{0, 0, 8, 8}};
  EXPECT_THROW(model.encoder().tokenize(img, make_exemplar_set(img, boxes, 32)), std::invalid_argument);
}

TEST(Decouple, SlicesQuadrants) {
  Grid s(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const auto a = decouple_attention(s, 2, 1);
  EXPECT_EQ(a.query, Grid(2, 2, {1, 2, 4, 5}));
  EXPECT_EQ(a.cls, Grid(2, 1, {3, 6}));
  EXPECT_EQ(a.match, Grid(1, 2, {7, 8}));
  EXPECT_EQ(a.exp, Grid(1, 1, {9}));
  EXPECT_EQ(reassemble_attention(a), s);
}

TEST(Decouple, NoExemplarTokens) {
  std::mt19937_64 rng(1);
  const Grid s = oracle::random_grid(4, 4, rng);
  const auto a = decouple_attention(s, 4, 0);
  EXPECT_EQ(a.query, s);
  EXPECT_EQ(a.cls.size(), 0u);
  EXPECT_EQ(a.match.size(), 0u);
  EXPECT_EQ(a.exp.size(), 0u);
}

TEST(Decouple, DimensionMismatchRejected) {
  EXPECT_THROW(decouple_attention(Grid(3, 3), 2, 2), std::invalid_argument);
}

TEST(Encode, ShapesAndRowStochasticMatch) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  const Image img = random_image(128, 128, 4);
  const std::vector<ExemplarBox> boxes{{10, 10, 30, 34}, {60, 60, 80, 90}};
  const auto ex = make_exemplar_set(img, boxes, cfg.exemplar_size);
  const auto seq = model.encoder().tokenize(img, ex);
  const auto out = model.encoder().encode(seq, 1.0, {.capture_attention = true});
  EXPECT_EQ(out.features.shape(), (Shape{64, 64}));
  EXPECT_EQ(out.enhanced.shape(), (Shape{8, 8, 65}));
  ASSERT_EQ(out.heads.size(), 4u);
  EXPECT_EQ(out.heads[0].query.rows, 64u);
  EXPECT_EQ(out.heads[0].cls.cols, 8u);
  EXPECT_EQ(out.heads[0].match.rows, 8u);
  EXPECT_EQ(out.heads[0].exp.rows, 8u);
  // With M_e = 1 the map is a mean of row-stochastic rows: it sums to 1.
  double total = 0;
  for (double v : out.match_map.data()) {
    EXPECT_GE(v, 0.0);
    total += v;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Encode, MagnitudeScalesMatchMapExactly) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  const Image img = random_image(128, 128, 5);
  const std::vector<ExemplarBox> boxes{{10, 10, 42, 42}};
  const auto seq = model.encoder().tokenize(img, make_exemplar_set(img, boxes, cfg.exemplar_size));
  const auto m1 = model.encoder().encode(seq, 1.0).match_map.values();
  const auto m4 = model.encoder().encode(seq, 4.0).match_map.values();
  for (std::size_t i = 0; i < m1.size(); ++i) EXPECT_EQ(m4[i], 4.0 * m1[i]);
}

TEST(Encode, ExemplarOrderDoesNotChangeMatchMap) {
  const ModelConfig cfg = ModelConfig::tiny();
  Model model(cfg);
  const Image img = random_image(128, 128, 6);
  std::vector<ExemplarBox> boxes{{10, 10, 30, 34}, {60, 60, 80, 90}, {5, 70, 40, 100}};
  const auto a = model.encoder().encode(
      model.encoder().tokenize(img, make_exemplar_set(img, boxes, 32)), 2.0);
  std::swap(boxes[0], boxes[2]);
  const auto b = model.encoder().encode(
      model.encoder().tokenize(img, make_exemplar_set(img, boxes, 32)), 2.0);
  const auto va = a.match_map.values(), vb = b.match_map.values();
  for (std::size_t i = 0; i < va.size(); ++i) EXPECT_NEAR(va[i], vb[i], 1e-10);
}

TEST(Encode, QuadrantsMatchReferenceForward) {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.depth = 2;
  cfg.init_seed = 9;
  Model model(cfg);
  const Image img = random_image(128, 128, 7);
  const std::vector<ExemplarBox> boxes{{3, 9, 40, 30}};
  const auto ex = make_exemplar_set(img, boxes, 32);
  const auto seq = model.encoder().tokenize(img, ex);
  const auto out = model.encoder().encode(seq, ex.magnitude, {.capture_attention = true});
  const auto ref = oracle::encoder_trace(cfg, model.params(), seq.tokens.data(), seq.n_image,
                                         seq.n_exemplar, ex.magnitude);
  for (std::size_t h = 0; h < out.heads.size(); ++h) {
    const Grid full = reassemble_attention(out.heads[h]);
    for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(full.values[i], ref.scores[h].v[i], 1e-10);
  }
  const auto mm = out.match_map.values();
  for (std::size_t i = 0; i < mm.size(); ++i) EXPECT_NEAR(mm[i], ref.match_map[i], 1e-10);
}

TEST(Encode, SingleHeadOrthonormalQueriesFavourDiagonal) {
  // Q = K with orthonormal rows, built by Gram-Schmidt on random vectors.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const std::size_t n = 5;
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < n; ++c) q[i * n + c] = n01(rng);
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < n; ++c) dot += q[i * n + c] * q[j * n + c];
      for (std::size_t c = 0; c < n; ++c) q[i * n + c] -= dot * q[j * n + c];
    }
    double norm = 0;
    for (std::size_t c = 0; c < n; ++c) norm += q[i * n + c] * q[i * n + c];
    for (std::size_t c = 0; c < n; ++c) q[i * n + c] /= std::sqrt(norm);
  }
  const Tensor Q({n, n}, q);
  const Grid scores(n, n, matmul(Q, transpose(Q)).values());
  const auto a = decouple_attention(scores, 3, 2);
  EXPECT_EQ(a.query.rows, 3u);
  EXPECT_EQ(a.cls.cols, 2u);
  EXPECT_EQ(a.match.rows, 2u);
  EXPECT_EQ(a.exp.cols, 2u);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      if (r != c) EXPECT_GT(a.query.at(r, r), a.query.at(r, c) + 0.9);
}

TEST(PositionEmbedding, BoundedAndDistinct) {
  const auto pe = sincos_position_embedding(4, 5, 16);
  ASSERT_EQ(pe.size(), 4u * 5 * 16);
  for (double v : pe) EXPECT_LE(std::fabs(v), 1.0);
  EXPECT_NE(std::vector<double>(pe.begin(), pe.begin() + 16),
            std::vector<double>(pe.begin() + 16, pe.begin() + 32));
}

TEST(ModelConfigTest, RejectsInconsistentGeometry) {
  ModelConfig c = ModelConfig::tiny();
  c.block_sizes = {40, 64, 128};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig::tiny();
  c.image_size = 120;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig::tiny();
  c.thresholds.bounds = {32};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ModelConfig::tiny();
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
}
