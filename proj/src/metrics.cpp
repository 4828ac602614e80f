#include "lcount/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lcount/model.hpp"

namespace lcount {

MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> gts,
                              double eps) {
  if (preds.empty()) throw std::invalid_argument("compute_metrics: no samples");
  if (preds.size() != gts.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(gts.size()) + " ground truths");
  }
  const std::size_t m = preds.size();
  double abs_sum = 0, sq_sum = 0, gt_sum = 0, mpe = 0, abs_mpe = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = preds[i] - gts[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    gt_sum += gts[i];
    mpe += e / (gts[i] + eps);
    abs_mpe += std::abs(e) / (gts[i] + eps);
  }
  MetricsReport r;
  r.m = m;
  r.mae = abs_sum / m;
  r.rmse = std::sqrt(sq_sum / m);
  r.mpe = mpe / m;
  r.abs_mpe = abs_mpe / m;
  if (gt_sum != 0.0) r.wca = 1.0 - abs_sum / gt_sum;
  const double mean_gt = gt_sum / m;
  double var = 0;
  for (double c : gts) var += (mean_gt - c) * (mean_gt - c);
  if (var > 0.0) r.r2 = 1.0 - sq_sum / var;
  return r;
}

MetricsReport compute_metrics(std::span<const double> preds, std::span<const double> gts,
                              std::span<const std::string> categories, double eps) {
  MetricsReport r = compute_metrics(preds, gts, eps);
  if (categories.size() != preds.size()) {
    throw std::invalid_argument("compute_metrics: category list length differs from predictions");
  }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    groups[categories[i]].first.push_back(preds[i]);
    groups[categories[i]].second.push_back(gts[i]);
  }
  for (const auto& [cat, pg] : groups) {
    MetricsReport c = compute_metrics(pg.first, pg.second, eps);
    c.stratum = cat;
    r.per_category.emplace(cat, std::move(c));
  }
  return r;
}

StratifiedReport stratify_by_exemplar_scale(std::span<const double> scale_priors,
                                            std::span<const double> preds,
                                            std::span<const double> gts, double small_max,
                                            double large_min) {
  if (scale_priors.size() != preds.size() || preds.size() != gts.size()) {
    throw std::invalid_argument("stratify_by_exemplar_scale: input lengths differ");
  }
  StratifiedReport out;
  auto fill = [&](Stratum& st, const char* name, auto&& member) {
    std::vector<double> p, g;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!member(scale_priors[i])) continue;
      st.members.push_back(i);
      p.push_back(preds[i]);
      g.push_back(gts[i]);
      if (gts[i] > 0) st.ratios.push_back(preds[i] / gts[i]);
    }
    if (!p.empty()) {
      st.report = compute_metrics(p, g);
      st.report->stratum = name;
    }
  };
  fill(out.small, "small", [&](double s) { return s < small_max; });
  fill(out.large, "large", [&](double s) { return s > large_min; });
  return out;
}

Predictor model_predictor(const Model& model) {
  return [&model](const AnnotatedImage& a, std::span<const ExemplarBox> boxes) {
    return model.predict(a.raster, boxes).count;
  };
}

namespace {

double input_scale(const AnnotatedImage& a, const EvalOptions& opts) {
  if (opts.short_side <= 0) return 1.0;
  return static_cast<double>(opts.short_side) / std::min(a.width, a.height);
}

EvalRun finish(EvalRun run) {
  run.report = compute_metrics(run.preds, run.gts, run.categories);
  return run;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / v.size())};
}

}  // namespace

EvalRun evaluate_three_shot(const std::vector<AnnotatedImage>& data, const Predictor& predict,
                            const EvalOptions& opts) {
  EvalRun run;
  for (const auto& a : data) {
    run.preds.push_back(predict(a, a.boxes));
    run.gts.push_back(static_cast<double>(a.points.size()));
    run.scale_priors.push_back(scale_prior(a.boxes) * input_scale(a, opts));
    run.categories.push_back(a.category);
  }
  return finish(std::move(run));
}

OneShotReport evaluate_one_shot(const std::vector<AnnotatedImage>& data, const Predictor& predict,
                                const EvalOptions& opts) {
  std::size_t max_boxes = 0;
  for (const auto& a : data) max_boxes = std::max(max_boxes, a.boxes.size());
  OneShotReport out;
  for (std::size_t k = 0; k < max_boxes; ++k) {
    EvalRun run;
    for (const auto& a : data) {
      if (a.boxes.size() <= k) continue;
      const std::span<const ExemplarBox> one(&a.boxes[k], 1);
      run.preds.push_back(predict(a, one));
      run.gts.push_back(static_cast<double>(a.points.size()));
      run.scale_priors.push_back(scale_prior(one) * input_scale(a, opts));
      run.categories.push_back(a.category);
    }
    out.runs.push_back(finish(std::move(run)));
  }
  if (out.runs.empty()) throw std::invalid_argument("evaluate_one_shot: no samples");
  std::vector<double> maes, rmses;
  for (const auto& r : out.runs) {
    maes.push_back(r.report.mae);
    rmses.push_back(r.report.rmse);
  }
  std::tie(out.mae_mean, out.mae_std) = mean_std(maes);
  std::tie(out.rmse_mean, out.rmse_std) = mean_std(rmses);
  return out;
}

ThroughputReport throughput(const std::function<void()>& infer, int warmup, int iters) {
  if (iters < 10) throw std::invalid_argument("throughput: at least 10 timed iterations are required");
  for (int i = 0; i < warmup; ++i) infer();
  ThroughputReport r;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    infer();
    const auto t1 = std::chrono::steady_clock::now();
    r.times_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::vector<double> sorted = r.times_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  r.median_ms = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  r.fps = 1000.0 / r.median_ms;
  return r;
}

ThroughputReport throughput(const Model& model, int width, int height, int warmup, int iters) {
  Image img(width, height);
  std::mt19937_64 rng(0);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng() & 0xff);
  const double bw = std::max(2, width / 8), bh = std::max(2, height / 8);
  const ExemplarBox box{width / 2.0 - bw / 2, height / 2.0 - bh / 2, width / 2.0 + bw / 2,
                        height / 2.0 + bh / 2};
  const std::vector<ExemplarBox> boxes{box};
  return throughput([&] { (void)model.predict(img, boxes); }, warmup, iters);
}

std::string format_report(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", *v);
    return std::string(b);
  };
  char buf[256];
  std::snprintf(buf, sizeof buf, "M=%zu MAE=%.4f RMSE=%.4f WCA=%s R2=%s MPE=%.4f |MPE|=%.4f", r.m,
                r.mae, r.rmse, opt(r.wca).c_str(), opt(r.r2).c_str(), r.mpe, r.abs_mpe);
  return (r.stratum.empty() ? "" : "[" + r.stratum + "] ") + buf;
}

namespace {

nlohmann::ordered_json report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  if (!r.stratum.empty()) j["stratum"] = r.stratum;
  j["M"] = r.m;
  j["MAE"] = r.mae;
  j["RMSE"] = r.rmse;
  j["WCA"] = r.wca ? nlohmann::ordered_json(*r.wca) : nlohmann::ordered_json(nullptr);
  j["R2"] = r.r2 ? nlohmann::ordered_json(*r.r2) : nlohmann::ordered_json(nullptr);
  j["MPE"] = r.mpe;
  j["abs_MPE"] = r.abs_mpe;
  if (!r.per_category.empty()) {
    auto& pc = j["per_category"];
    for (const auto& [cat, c] : r.per_category) pc[cat] = report_to_json(c);
  }
  return j;
}

}  // namespace

std::string report_json(const MetricsReport& r) { return report_to_json(r).dump(); }

}  // namespace lcount
