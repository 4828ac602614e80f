#include "lcount/training.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

namespace lcount {

using ojson = nlohmann::ordered_json;

TrainConfig TrainConfig::tiny() {
  TrainConfig c;
  c.base_lr = 1e-3;
  c.epochs = 30;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
  if (!(base_lr > 0)) fail("base_lr must be positive");
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (weight_decay < 0) fail("weight_decay must be nonnegative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail("betas must lie in [0,1)");
  if (!(adam_eps > 0)) fail("adam_eps must be positive");
  if (!(warmup_fraction >= 0 && warmup_fraction <= 1)) fail("warmup_fraction must lie in [0,1]");
  if (!(start_div >= 1) || !(final_div >= 1)) fail("start_div and final_div must be >= 1");
  if (!(mosaic_prob >= 0 && mosaic_prob <= 1)) fail("mosaic_prob must lie in [0,1]");
  if (!(density.sigma_min > 0 && density.sigma_divisor > 0 && density.truncate > 0)) {
    fail("density kernel parameters must be positive");
  }
}

std::string to_json(const TrainConfig& c) {
  ojson j;
  j["base_lr"] = c.base_lr;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["warmup_fraction"] = c.warmup_fraction;
  j["start_div"] = c.start_div;
  j["final_div"] = c.final_div;
  j["mosaic_prob"] = c.mosaic_prob;
  j["sigma_divisor"] = c.density.sigma_divisor;
  j["sigma_min"] = c.density.sigma_min;
  j["kernel_truncate"] = c.density.truncate;
  j["seed"] = c.seed;
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  const auto j = ojson::parse(text);
  TrainConfig c;
  c.base_lr = j.value("base_lr", c.base_lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
  c.start_div = j.value("start_div", c.start_div);
  c.final_div = j.value("final_div", c.final_div);
  c.mosaic_prob = j.value("mosaic_prob", c.mosaic_prob);
  c.density.sigma_divisor = j.value("sigma_divisor", c.density.sigma_divisor);
  c.density.sigma_min = j.value("sigma_min", c.density.sigma_min);
  c.density.truncate = j.value("kernel_truncate", c.density.truncate);
  c.seed = j.value("seed", c.seed);
  return c;
}

// ---------------------------------------------------------------------------

OneCycleSchedule::OneCycleSchedule(double base_lr, std::uint64_t total_steps, double warmup_fraction,
                                   double start_div, double final_div)
    : base_(base_lr), start_(base_lr / start_div), floor_(base_lr / final_div), total_(total_steps) {
  if (total_steps == 0) throw std::invalid_argument("schedule: total_steps must be positive");
  warmup_ = static_cast<std::uint64_t>(std::llround(warmup_fraction * static_cast<double>(total_steps)));
  warmup_ = std::min(warmup_, total_steps - 1);
}

double OneCycleSchedule::lr(std::uint64_t step) const {
  if (step >= total_) step = total_ - 1;
  if (step < warmup_) return start_ + (base_ - start_) * static_cast<double>(step) / warmup_;
  const std::uint64_t span = total_ - 1 - warmup_;
  if (span == 0) return base_;
  const double t = static_cast<double>(step - warmup_) / static_cast<double>(span);
  return floor_ + (base_ - floor_) * 0.5 * (1.0 + std::cos(M_PI * t));
}

AdamW::AdamW(ParameterSet& params, double beta1, double beta2, double eps, double weight_decay)
    : params_(params), b1_(beta1), b2_(beta2), eps_(eps), wd_(weight_decay) {
  for (const auto& t : params_.tensors()) {
    m_.emplace_back(t.numel(), 0.0);
    v_.emplace_back(t.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  auto& tensors = params_.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Tensor& p = tensors[i];
    auto data = p.mutable_data();
    const auto& grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = p.rank() >= 2 ? 1.0 - lr * wd_ : 1.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double g = grad.empty() ? 0.0 : grad[k];
      m[k] = b1_ * m[k] + (1.0 - b1_) * g;
      v[k] = b2_ * v[k] + (1.0 - b2_) * g * g;
      data[k] *= decay;
      data[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

void AdamW::export_state(CheckpointExtras& e) const {
  e.adam_step = t_;
  e.adam_m = m_;
  e.adam_v = v_;
}

void AdamW::import_state(const CheckpointExtras& e) {
  if (e.adam_m.empty()) throw TrainingError("resume: checkpoint carries no optimizer state");
  if (e.adam_m.size() != m_.size()) throw TrainingError("resume: optimizer state does not match model");
  t_ = e.adam_step;
  m_ = e.adam_m;
  v_ = e.adam_v;
}

// ---------------------------------------------------------------------------

PreparedSample prepare_sample(const AnnotatedImage& sample,
                              const std::vector<const AnnotatedImage*>& pool, const Model& model,
                              const TrainConfig& cfg, std::mt19937_64& rng) {
  const ModelConfig& mc = model.config();
  const int size = static_cast<int>(mc.image_size);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool mosaic = u01(rng) < cfg.mosaic_prob;
  const AnnotatedImage source =
      mosaic ? mosaic_augment(sample, pool, rng, MosaicOptions{size, 20}) : sample;
  PreparedSample out;
  out.exemplars = make_exemplar_set(source.raster, source.boxes, mc.exemplar_size);
  out.patch = crop_training_patch(source, size, rng);
  const DensityMap d = density_from_dots(out.patch.points, size, size, out.exemplars.scale_prior,
                                         cfg.density);
  const long grid = size / mc.patch_size;
  for (std::size_t b = 0; b < mc.branch_count(); ++b) {
    RedundantCountMap gt = redundant_gt(d, branch_geometry(mc, b, grid, grid));
    gt.branch = b;
    out.targets.push_back(std::move(gt));
  }
  return out;
}

Tensor sample_loss(const Model& model, const PreparedSample& s, const TrainConfig&) {
  const ForwardResult r = model.forward(s.patch.raster, s.exemplars, CountMode::kTrain);
  return gated_l1_loss(r.maps, s.targets, s.exemplars.scale_prior, model.config().thresholds);
}

MetricsReport validate_model(const Model& model, const std::vector<AnnotatedImage>& val) {
  std::vector<double> preds, gts;
  for (const auto& a : val) {
    preds.push_back(model.predict(a.raster, a.boxes).count);
    gts.push_back(static_cast<double>(a.points.size()));
  }
  return compute_metrics(preds, gts);
}

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  return std::mt19937_64(seq);
}

ojson record_json(const EpochRecord& r) {
  ojson j;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["lr"] = r.lr;
  j["train_loss"] = r.train_loss;
  j["val_mae"] = r.val.mae;
  j["val_rmse"] = r.val.rmse;
  j["val_r2"] = r.val.r2 ? ojson(*r.val.r2) : ojson(nullptr);
  return j;
}

std::vector<AnnotatedImage> to_model_scale(const std::vector<AnnotatedImage>& data, long size) {
  std::vector<AnnotatedImage> out;
  out.reserve(data.size());
  for (const auto& a : data) {
    if (a.raster.empty()) throw TrainingError(a.image_path + ": image raster not loaded");
    out.push_back(resize_shortest_side(a, static_cast<int>(size)));
  }
  return out;
}

}  // namespace

FitResult fit(const std::vector<AnnotatedImage>& train_in, const std::vector<AnnotatedImage>& val_in,
              Model& model, const TrainConfig& cfg, const FitOptions& opts) {
  cfg.validate();
  if (train_in.empty()) throw TrainingError("fit: empty training set");
  for (const auto& a : train_in) {
    if (a.boxes.empty()) throw TrainingError(a.image_path + ": no exemplar boxes");
  }
  const long size = model.config().image_size;
  const auto train = to_model_scale(train_in, size);
  const auto val = to_model_scale(val_in, size);
  std::vector<const AnnotatedImage*> pool;
  for (const auto& a : train) pool.push_back(&a);

  const std::uint64_t steps_per_epoch =
      (train.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / cfg.batch_size;
  const OneCycleSchedule schedule(cfg.base_lr, steps_per_epoch * cfg.epochs, cfg.warmup_fraction,
                                  cfg.start_div, cfg.final_div);
  AdamW opt(model.params(), cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);

  FitResult result;
  result.best_val_mae = std::numeric_limits<double>::infinity();
  int first_epoch = 1;
  std::uint64_t step = 0;

  const bool writing = !opts.out_dir.empty();
  std::ofstream log;
  if (writing) {
    std::filesystem::create_directories(opts.out_dir);
    log.open(opts.out_dir / "train_log.jsonl", opts.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw TrainingError("cannot write " + (opts.out_dir / "train_log.jsonl").string());
  }
  auto save = [&](const std::filesystem::path& p, int epoch) {
    if (!writing) return;
    CheckpointExtras ex;
    opt.export_state(ex);
    ojson meta;
    meta["epoch"] = epoch;
    meta["step"] = step;
    meta["best_val_mae"] = result.best_val_mae;
    meta["best_epoch"] = result.best_epoch;
    meta["train_config"] = ojson::parse(to_json(cfg));
    ex.meta_json = meta.dump();
    save_checkpoint(p, model, ex);
  };
  auto emit = [&](const EpochRecord& r) {
    result.log.push_back(r);
    if (writing) log << record_json(r).dump() << '\n' << std::flush;
    if (opts.on_epoch) opts.on_epoch(r);
  };

  if (opts.resume) {
    CheckpointExtras ex;
    load_checkpoint_into(*opts.resume, model, &ex);
    opt.import_state(ex);
    const auto meta = ojson::parse(ex.meta_json);
    first_epoch = meta.at("epoch").get<int>() + 1;
    step = meta.at("step").get<std::uint64_t>();
    result.best_val_mae = meta.value("best_val_mae", result.best_val_mae);
    result.best_epoch = meta.value("best_epoch", 0);
  } else if (opts.evaluate_initial && !val.empty()) {
    EpochRecord r;
    r.val = validate_model(model, val);
    r.lr = schedule.lr(0);
    emit(r);
  }

  const int last_epoch = opts.stop_after_epoch > 0 ? std::min(cfg.epochs, opts.stop_after_epoch) : cfg.epochs;
  for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
    std::mt19937_64 rng = epoch_rng(cfg.seed, epoch);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      model.params().zero_grad();
      Tensor total;
      StepInfo info;
      for (std::size_t i = begin; i < end; ++i) {
        const PreparedSample s = prepare_sample(train[order[i]], pool, model, cfg, rng);
        info.selected_branches.push_back(select_branch(s.exemplars.scale_prior, model.config().thresholds));
        const Tensor loss = sample_loss(model, s, cfg);
        total = i == begin ? loss : add(total, loss);
      }
      total = scale(total, 1.0 / static_cast<double>(end - begin));
      const double value = total.item();
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                            std::to_string(epoch) + "); last good checkpoint kept");
      }
      total.backward();
      const double lr = schedule.lr(step);
      if (opts.on_step) {
        info.epoch = epoch;
        info.step = step;
        info.lr = lr;
        info.loss = value;
        info.model = &model;
        opts.on_step(info);
      }
      opt.step(lr);
      ++step;
      loss_sum += value * static_cast<double>(end - begin);
      loss_count += end - begin;
    }
    EpochRecord r;
    r.epoch = epoch;
    r.step = step;
    r.lr = schedule.lr(step == 0 ? 0 : step - 1);
    r.train_loss = loss_sum / static_cast<double>(loss_count);
    if (!val.empty()) {
      r.val = validate_model(model, val);
      if (r.val.mae < result.best_val_mae) {
        result.best_val_mae = r.val.mae;
        result.best_epoch = epoch;
        save(opts.out_dir / "best.ckpt", epoch);
      }
    }
    emit(r);
    save(opts.out_dir / "last.ckpt", epoch);
  }
  result.steps = step;
  return result;
}

}  // namespace lcount
