#pragma once

// Counting metrics, exemplar-scale strata, evaluation protocols and
// throughput measurement.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lcount/dataset.hpp"
#include "lcount/geometry.hpp"

namespace lcount {

class Model;

struct MetricsReport {
  std::size_t m = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> wca;  // absent when the ground truths sum to zero
  std::optional<double> r2;   // absent when every ground truth is equal
  double mpe = 0.0;           // signed mean of (p - c) / (c + eps)
  double abs_mpe = 0.0;       // mean of |p - c| / (c + eps)
  std::string stratum;
  std::map<std::string, MetricsReport> per_category;
};

/// Throws std::invalid_argument on empty or unequal-length inputs.
MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> gts,
                              double eps = 1e-6);
/// As above, plus a per-category breakdown.
MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> gts,
                              std::span<const std::string> categories, double eps = 1e-6);

struct Stratum {
  std::optional<MetricsReport> report;  // absent when no sample falls in the stratum
  std::vector<double> ratios;           // pred / gt for samples with gt > 0
  std::vector<std::size_t> members;     // sample indices
};

struct StratifiedReport {
  Stratum small;  // s < small_max
  Stratum large;  // s > large_min
};

StratifiedReport stratify_by_exemplar_scale(std::span<const double> scale_priors,
                                            std::span<const double> preds,
                                            std::span<const double> gts, double small_max = 32.0,
                                            double large_min = 96.0);

/// Count for one image given the exemplar boxes to use (original coordinates).
using Predictor = std::function<double(const AnnotatedImage&, std::span<const ExemplarBox>)>;

Predictor model_predictor(const Model& model);

struct EvalRun {
  std::vector<double> preds;
  std::vector<double> gts;
  std::vector<double> scale_priors;  // in model-input pixels
  std::vector<std::string> categories;
  MetricsReport report;
};

struct EvalOptions {
  /// Short side the model resizes to; scale priors are reported at that
  /// resolution. 0 keeps original coordinates.
  long short_side = 0;
};

/// Every sample counted once with all of its exemplar boxes.
EvalRun evaluate_three_shot(const std::vector<AnnotatedImage>& data, const Predictor& predict,
                            const EvalOptions& opts = {});

struct OneShotReport {
  std::vector<EvalRun> runs;  // one per exemplar index that any sample has
  double mae_mean = 0, mae_std = 0;
  double rmse_mean = 0, rmse_std = 0;
};

/// Runs evaluation once per exemplar index, each time with that single box,
/// and aggregates MAE and RMSE as mean and population standard deviation.
OneShotReport evaluate_one_shot(const std::vector<AnnotatedImage>& data, const Predictor& predict,
                                const EvalOptions& opts = {});

struct ThroughputReport {
  double fps = 0.0;
  double median_ms = 0.0;
  std::vector<double> times_ms;
};

/// Median wall-clock of `iters` calls after `warmup` untimed calls.
ThroughputReport throughput(const std::function<void()>& infer, int warmup, int iters);
/// Single-image inference on a random width x height image with one centred box.
ThroughputReport throughput(const Model& model, int width, int height, int warmup, int iters);

/// One-line human-readable summary; absent metrics print as "n/a".
std::string format_report(const MetricsReport& r);
/// JSON object with absent metrics written as null.
std::string report_json(const MetricsReport& r);

}  // namespace lcount
