#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <thread>

#include "lcount/metrics.hpp"
#include "lcount/model.hpp"
#include "oracles.hpp"

using namespace lcount;

TEST(Metrics, TwoSampleExample) {
  const std::vector<double> p{3, 5}, c{1, 4};
  const auto r = compute_metrics(p, c);
  EXPECT_DOUBLE_EQ(r.mae, 1.5);
  EXPECT_DOUBLE_EQ(r.rmse, std::sqrt(2.5));
  ASSERT_TRUE(r.wca);
  EXPECT_DOUBLE_EQ(*r.wca, 1 - 3.0 / 5.0);
  ASSERT_TRUE(r.r2);
  EXPECT_DOUBLE_EQ(*r.r2, 1 - 5.0 / 4.5);
  EXPECT_EQ(r.m, 2u);
}

TEST(Metrics, PerfectPredictions) {
  const std::vector<double> c{2, 7, 11, 0};
  const auto r = compute_metrics(c, c);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.rmse, 0.0);
  EXPECT_EQ(*r.wca, 1.0);
  EXPECT_EQ(*r.r2, 1.0);
  EXPECT_EQ(r.mpe, 0.0);
}

TEST(Metrics, ConstantOffsetEqualsMaeAndRmse) {
  const std::vector<double> c{1, 2, 3, 4, 5};
  std::vector<double> p = c;
  for (double& v : p) v += 2.0;
  const auto r = compute_metrics(p, c);
  EXPECT_NEAR(r.mae, 2.0, 1e-12);
  EXPECT_NEAR(r.rmse, 2.0, 1e-12);
  EXPECT_GT(r.mpe, 0.0);
  EXPECT_NEAR(r.mpe, r.abs_mpe, 1e-12);
}

TEST(Metrics, DegenerateCasesAbsent) {
  const std::vector<double> zeros{0, 0, 0}, p{1, 0, 2};
  const auto a = compute_metrics(p, zeros);
  EXPECT_FALSE(a.wca);
  EXPECT_FALSE(a.r2);
  const std::vector<double> same{4, 4, 4};
  const auto b = compute_metrics(p, same);
  EXPECT_TRUE(b.wca);
  EXPECT_FALSE(b.r2);
  EXPECT_NE(format_report(b).find("R2=n/a"), std::string::npos);
  EXPECT_NE(report_json(b).find("\"R2\":null"), std::string::npos) << report_json(b);
}

TEST(Metrics, InvalidInputRejected) {
  const std::vector<double> a{1, 2}, b{1};
  EXPECT_THROW(compute_metrics(a, b), std::invalid_argument);
  EXPECT_THROW(compute_metrics(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
}

TEST(Metrics, MatchesOracleOnRandomPairs) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 200);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(100), c(100);
    for (int i = 0; i < 100; ++i) {
      c[i] = std::floor(u(rng));
      p[i] = u(rng);
    }
    const auto r = compute_metrics(p, c);
    const auto o = oracle::metrics(p, c);
    EXPECT_NEAR(r.mae, o.mae, 1e-9);
    EXPECT_NEAR(r.rmse, o.rmse, 1e-9);
    EXPECT_NEAR(*r.wca, *o.wca, 1e-9);
    EXPECT_NEAR(*r.r2, *o.r2, 1e-9);
    EXPECT_NEAR(r.mpe, o.mpe, 1e-9);
  }
}

TEST(Metrics, PerCategoryBreakdown) {
  const std::vector<double> p{1, 2, 10}, c{1, 3, 12};
  const std::vector<std::string> cats{"a", "a", "b"};
  const auto r = compute_metrics(p, c, cats);
  ASSERT_EQ(r.per_category.size(), 2u);
  EXPECT_DOUBLE_EQ(r.per_category.at("a").mae, 0.5);
  EXPECT_DOUBLE_EQ(r.per_category.at("b").mae, 2.0);
  EXPECT_EQ(r.per_category.at("a").m, 2u);
}

TEST(Stratify, AllMidScaleGivesEmptyStrata) {
  const std::vector<double> s(4, 64.0), p{1, 2, 3, 4}, c{1, 2, 3, 4};
  const auto r = stratify_by_exemplar_scale(s, p, c);
  EXPECT_FALSE(r.small.report);
  EXPECT_FALSE(r.large.report);
  EXPECT_TRUE(r.small.members.empty());
}

TEST(Stratify, OneSamplePerStratumWithRatios) {
  const std::vector<double> s{16, 128}, p{6, 9}, c{4, 0};
  const auto r = stratify_by_exemplar_scale(s, p, c);
  ASSERT_TRUE(r.small.report);
  ASSERT_TRUE(r.large.report);
  EXPECT_EQ(r.small.members, (std::vector<std::size_t>{0}));
  EXPECT_EQ(r.large.members, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.small.ratios, (std::vector<double>{1.5}));
  EXPECT_TRUE(r.large.ratios.empty());
  EXPECT_DOUBLE_EQ(r.small.report->mae, 2.0);
  EXPECT_DOUBLE_EQ(r.large.report->mae, 9.0);
}

TEST(Stratify, BoundariesAreExclusive) {
  const std::vector<double> s{32, 96, 31.999, 96.001}, p{1, 1, 1, 1}, c{1, 1, 1, 1};
  const auto r = stratify_by_exemplar_scale(s, p, c);
  EXPECT_EQ(r.small.members, (std::vector<std::size_t>{2}));
  EXPECT_EQ(r.large.members, (std::vector<std::size_t>{3}));
}

TEST(Throughput, FpsIsInverseMedian) {
  int calls = 0;
  const auto r = throughput([&] { ++calls; std::this_thread::sleep_for(std::chrono::milliseconds(2)); }, 2, 11);
  EXPECT_EQ(calls, 13);
  ASSERT_EQ(r.times_ms.size(), 11u);
  std::vector<double> t = r.times_ms;
  std::sort(t.begin(), t.end());
  EXPECT_EQ(r.median_ms, t[5]);
  EXPECT_DOUBLE_EQ(r.fps, 1000.0 / r.median_ms);
  EXPECT_GE(r.median_ms, 2.0);
  EXPECT_THROW(throughput([] {}, 0, 9), std::invalid_argument);
}

TEST(Throughput, DeeperModelIsSlower) {
  ModelConfig shallow = ModelConfig::tiny();
  shallow.depth = 1;
  ModelConfig deep = ModelConfig::tiny();
  deep.depth = 6;
  const Model a(shallow), b(deep);
  const auto ra = throughput(a, 128, 128, 1, 10);
  const auto rb = throughput(b, 128, 128, 1, 10);
  EXPECT_GT(ra.fps, rb.fps);
}

TEST(Protocols, OracleStubGivesZeroError) {
  SynthConfig c;
  c.seed = 4;
  const auto data = synth_dataset(c, 12);
  const Predictor exact = [](const AnnotatedImage& a, std::span<const ExemplarBox>) {
    return static_cast<double>(a.points.size());
  };
  const auto three = evaluate_three_shot(data, exact);
  EXPECT_EQ(three.report.mae, 0.0);
  EXPECT_EQ(three.preds.size(), 12u);
  const auto one = evaluate_one_shot(data, exact);
  EXPECT_EQ(one.mae_mean, 0.0);
  EXPECT_EQ(one.mae_std, 0.0);
  EXPECT_GE(one.runs.size(), 1u);
}

TEST(Protocols, OneShotPassesSingleBoxes) {
  SynthConfig c;
  c.seed = 5;
  c.count_min = 5;
  auto data = synth_dataset(c, 6);
  std::vector<std::size_t> seen;
  const Predictor probe = [&](const AnnotatedImage&, std::span<const ExemplarBox> boxes) {
    seen.push_back(boxes.size());
    return 0.0;
  };
  const auto one = evaluate_one_shot(data, probe);
  EXPECT_EQ(one.runs.size(), 3u);
  for (std::size_t n : seen) EXPECT_EQ(n, 1u);
  // Spread across runs: each run evaluates the same ground truths here.
  EXPECT_NEAR(one.mae_std, 0.0, 1e-12);
}

TEST(Protocols, ScalePriorsFollowShortSide) {
  AnnotatedImage a;
  a.image_path = "a";
  a.width = 768;
  a.height = 1000;
  a.boxes = {{0, 0, 64, 64}};
  a.category = "c";
  const Predictor zero = [](const AnnotatedImage&, std::span<const ExemplarBox>) { return 0.0; };
  EXPECT_DOUBLE_EQ(evaluate_three_shot({a}, zero).scale_priors[0], 64.0);
  EXPECT_DOUBLE_EQ(evaluate_three_shot({a}, zero, {.short_side = 384}).scale_priors[0], 32.0);
}
