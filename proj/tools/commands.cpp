#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lcount/gradcheck.hpp"
#include "lcount/metrics.hpp"
#include "lcount/model.hpp"
#include "lcount/normalize.hpp"

namespace lcount::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

fs::path default_output_dir(const std::string& command) {
  const char* root = std::getenv("LCOUNT_OUTPUT_ROOT");
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::gmtime(&now));
  return fs::path(root != nullptr && *root != '\0' ? root : "runs") / (command + "-" + stamp);
}

ExemplarBox parse_box(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw std::invalid_argument("malformed box '" + text + "'");
    v.push_back(x);
  }
  if (v.size() != 4) throw std::invalid_argument("box '" + text + "' must have four values x1,y1,x2,y2");
  return {v[0], v[1], v[2], v[3]};
}

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << s;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw std::runtime_error(std::string("missing ") + what + " " + p.string());
}

}  // namespace

int cmd_synth(const SynthArgs& a) {
  if (a.n <= 0) throw std::invalid_argument("--n must be positive");
  a.config.validate();
  const auto scenes = synth_dataset(a.config, a.n);
  write_dataset(a.out, scenes, a.config, a.n);
  const Splits s = make_splits(scenes, a.ratios, a.config.seed, a.category_disjoint);
  write_splits(s, a.out / "splits");
  std::cout << "wrote " << scenes.size() << " scenes to " << a.out.string() << "\n";
  for (std::size_t k = 0; k < s.names.size(); ++k) {
    std::cout << "  " << s.names[k] << ": " << s.ids[k].size() << "\n";
  }
  return 0;
}

int cmd_train(const TrainArgs& a) {
  const fs::path train_split = a.train_split.empty() ? a.data / "splits" / "train.txt" : a.train_split;
  const fs::path val_split = a.val_split.empty() ? a.data / "splits" / "val.txt" : a.val_split;
  require_file(train_split, "split file");
  require_file(val_split, "split file");
  const auto train = load_dataset(a.data, train_split);
  const auto val = load_dataset(a.data, val_split);
  if (train.empty()) throw std::runtime_error("empty training split " + train_split.string());

  fs::create_directories(a.out);
  write_text(a.out / "model_config.json", to_json(a.model) + "\n");
  write_text(a.out / "train_config.json", to_json(a.train) + "\n");
  Model model(a.model);
  FitOptions opts;
  opts.out_dir = a.out;
  if (!a.resume.empty()) opts.resume = a.resume;
  opts.on_epoch = [](const EpochRecord& r) {
    std::printf("epoch %3d  step %6llu  lr %.3g  loss %.5f  val MAE %.3f  RMSE %.3f\n", r.epoch,
                static_cast<unsigned long long>(r.step), r.lr, r.train_loss, r.val.mae, r.val.rmse);
    std::fflush(stdout);
  };
  const FitResult res = fit(train, val, model, a.train, opts);
  std::printf("best val MAE %.4f at epoch %d; checkpoints in %s\n", res.best_val_mae, res.best_epoch,
              a.out.string().c_str());
  return 0;
}

int cmd_eval(const EvalArgs& a) {
  if (a.shots != 1 && a.shots != 3) throw std::invalid_argument("--shots must be 1 or 3");
  const fs::path split = a.split.empty() ? a.data / "splits" / "test.txt" : a.split;
  require_file(split, "split file");
  const auto model = load_checkpoint(a.checkpoint);
  const auto data = load_dataset(a.data, split);
  if (data.empty()) throw std::runtime_error("empty split " + split.string());
  const Predictor predict = model_predictor(*model);
  EvalOptions eo;
  eo.short_side = model->config().image_size;

  ojson out;
  out["checkpoint"] = a.checkpoint.string();
  out["split"] = split.string();
  out["shots"] = a.shots;
  EvalRun primary;
  if (a.shots == 3) {
    primary = evaluate_three_shot(data, predict, eo);
    std::cout << "3-shot " << format_report(primary.report) << "\n";
    out["metrics"] = ojson::parse(report_json(primary.report));
  } else {
    OneShotReport r = evaluate_one_shot(data, predict, eo);
    std::printf("1-shot MAE %.4f +- %.4f  RMSE %.4f +- %.4f over %zu exemplar indices\n", r.mae_mean,
                r.mae_std, r.rmse_mean, r.rmse_std, r.runs.size());
    out["mae_mean"] = r.mae_mean;
    out["mae_std"] = r.mae_std;
    out["rmse_mean"] = r.rmse_mean;
    out["rmse_std"] = r.rmse_std;
    for (const auto& run : r.runs) out["runs"].push_back(ojson::parse(report_json(run.report)));
    primary = r.runs.front();
  }
  const StratifiedReport strata = stratify_by_exemplar_scale(primary.scale_priors, primary.preds,
                                                             primary.gts, a.small_max, a.large_min);
  for (const auto* st : {&strata.small, &strata.large}) {
    const char* name = st == &strata.small ? "small" : "large";
    if (st->report) {
      std::cout << format_report(*st->report) << "\n";
      out["strata"][name] = ojson::parse(report_json(*st->report));
      out["strata"][name]["ratios"] = st->ratios;
    } else {
      std::cout << "[" << name << "] absent (no samples)\n";
      out["strata"][name] = nullptr;
    }
  }

  const int size = static_cast<int>(model->config().image_size);
  std::vector<double> medians;
  for (int r = 0; r < a.fps_repeats; ++r) {
    const ThroughputReport t = throughput(*model, size, size, a.fps_warmup, a.fps_iters);
    medians.push_back(t.median_ms);
  }
  const auto [lo, hi] = std::minmax_element(medians.begin(), medians.end());
  const double median_ms = medians[medians.size() / 2];
  const double spread = (*hi - *lo) / *lo;
  std::printf("throughput %dx%d: %.1f FPS (%.2f ms/frame), repeat spread %.1f%%\n", size, size,
              1000.0 / median_ms, median_ms, 100.0 * spread);
  out["throughput"] = {{"width", size},         {"height", size},
                       {"fps", 1000.0 / median_ms}, {"median_ms", median_ms},
                       {"repeat_medians_ms", medians}, {"repeat_spread", spread}};

  fs::create_directories(a.out);
  write_text(a.out / "metrics.json", out.dump(2) + "\n");
  return 0;
}

int cmd_count(const CountArgs& a) {
  if (a.boxes.empty() || a.boxes.size() > kMaxExemplars) {
    throw std::invalid_argument("expected 1 to 3 --box values, got " + std::to_string(a.boxes.size()));
  }
  std::vector<ExemplarBox> boxes;
  for (const auto& b : a.boxes) boxes.push_back(parse_box(b));
  const Image image = load_image(a.image);
  for (const auto& b : boxes) validate_box(b, image.width, image.height);
  const auto model = load_checkpoint(a.checkpoint);
  const Prediction p = model->predict(image, boxes);
  const auto& k = model->config().block_sizes;
  std::printf("count %.4f\n", p.count);
  std::printf("branch %zu (k=%ld, s=%.3f)\n", p.branch + 1, k[p.branch], p.scale_prior);

  fs::create_directories(a.out);
  save_grid_text(p.count_map.values, a.out / "count_map.txt");
  save_grid_text(p.match_map, a.out / "match_map.txt");
  for (VisualMode mode : {VisualMode::kDetection, VisualMode::kDensity}) {
    const VisualizationMap v = visualize(p.count_map, p.match_map, p.magnitude, mode);
    const char* name = mode == VisualMode::kDetection ? "detection" : "density";
    save_grid_text(v.hint, a.out / (std::string(name) + "_hint.txt"));
    render(v.overlay, mode, p.input, a.out / (std::string(name) + ".png"));
  }
  ojson j;
  j["count"] = p.count;
  j["branch"] = p.branch + 1;
  j["block_size"] = k[p.branch];
  j["scale_prior"] = p.scale_prior;
  j["magnitude"] = p.magnitude;
  write_text(a.out / "count.json", j.dump(2) + "\n");
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& a) {
  if (a.seeds < 1) throw std::invalid_argument("--seeds must be positive");
  if (!(a.tol > 0)) throw std::invalid_argument("--tol must be positive");
  GradSuiteOptions o;
  o.check.eps = a.eps;
  o.check.rel_tol = a.tol;
  o.check.denom_floor = a.floor;
  o.seeds.clear();
  for (int s = 0; s < a.seeds; ++s) o.seeds.push_back(static_cast<std::uint64_t>(s));
  o.model_coords = static_cast<std::size_t>(a.coords);
  o.inject_bug = a.inject_bug;
  const auto t0 = std::chrono::steady_clock::now();
  const auto reports = run_gradcheck_suite(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t failed = 0;
  std::printf("%-40s %8s %12s %12s  %s\n", "check", "coords", "max abs", "max rel", "result");
  for (const auto& r : reports) {
    std::printf("%-40s %8zu %12.3e %12.3e  %s%s%s\n", r.op_name.c_str(), r.coords_checked,
                r.max_abs_error, r.max_rel_error, r.passed ? "pass" : "FAIL",
                r.failure.empty() ? "" : ": ", r.failure.c_str());
    if (!r.passed) {
      ++failed;
      std::printf("%-40s worst: tensor %zu coord %zu analytic %.6e numeric %.6e\n", "",
                  r.worst_param, r.worst_coord, r.worst_analytic, r.worst_numeric);
    }
  }
  std::printf("%zu/%zu checks passed (eps %g, tol %g) in %.1f s\n", reports.size() - failed,
              reports.size(), a.eps, a.tol, secs);
  return failed == 0 ? 0 : 1;
}

}  // namespace lcount::cli
