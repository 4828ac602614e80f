#pragma once

// AdamW, the one-cycle schedule, single training steps and the epoch loop.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcount/dataset.hpp"
#include "lcount/metrics.hpp"
#include "lcount/model.hpp"
#include "lcount/supervision.hpp"

namespace lcount {

struct TrainConfig {
  double base_lr = 1e-4;
  int epochs = 200;
  int batch_size = 1;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.3;
  double start_div = 100.0;   // lr at step 0 is base_lr / start_div
  double final_div = 1e4;     // lr at the final step is base_lr / final_div
  double mosaic_prob = 0.5;
  DensityOptions density;
  std::uint64_t seed = 0;

  /// Defaults used with ModelConfig::tiny().
  static TrainConfig tiny();
  void validate() const;
};

std::string to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const std::string& text);

class OneCycleSchedule {
 public:
  OneCycleSchedule(double base_lr, std::uint64_t total_steps, double warmup_fraction = 0.3,
                   double start_div = 100.0, double final_div = 1e4);
  /// Linear from base/start_div to base over the warmup steps, then cosine
  /// down to base/final_div at step total_steps - 1.
  double lr(std::uint64_t step) const;
  std::uint64_t warmup_steps() const { return warmup_; }
  std::uint64_t total_steps() const { return total_; }

 private:
  double base_, start_, floor_;
  std::uint64_t total_, warmup_;
};

/// Adam with decoupled weight decay applied to tensors of rank >= 2.
class AdamW {
 public:
  AdamW(ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
        double weight_decay = 0.05);
  void step(double lr);
  std::uint64_t steps() const { return t_; }
  void export_state(CheckpointExtras& e) const;
  void import_state(const CheckpointExtras& e);

 private:
  ParameterSet& params_;
  double b1_, b2_, eps_, wd_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// A training sample after augmentation and cropping, with its supervision.
struct PreparedSample {
  AnnotatedImage patch;
  ExemplarSet exemplars;
  std::vector<RedundantCountMap> targets;  // one per branch
};

/// augment -> crop -> exemplars (taken before cropping) -> per-branch ground truth.
/// `sample` must already be resized to the model's input scale.
PreparedSample prepare_sample(const AnnotatedImage& sample,
                              const std::vector<const AnnotatedImage*>& pool, const Model& model,
                              const TrainConfig& cfg, std::mt19937_64& rng);

/// Forward through every branch and the gated loss for one prepared sample.
Tensor sample_loss(const Model& model, const PreparedSample& s, const TrainConfig& cfg);

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StepInfo {
  int epoch = 0;
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::vector<std::size_t> selected_branches;  // per sample in the batch
  const Model* model = nullptr;  // gradients are populated, update not yet applied
};

struct EpochRecord {
  int epoch = 0;          // 0 is the evaluation before any update
  std::uint64_t step = 0;  // global steps completed
  double lr = 0.0;
  double train_loss = 0.0;
  MetricsReport val;
};

struct FitOptions {
  std::filesystem::path out_dir;  // log, best and final checkpoints; empty writes nothing
  std::optional<std::filesystem::path> resume;
  std::function<void(const StepInfo&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  bool evaluate_initial = true;
  /// Stop after this many epochs of the schedule (0 runs them all).
  int stop_after_epoch = 0;
};

struct FitResult {
  std::vector<EpochRecord> log;
  double best_val_mae = 0.0;
  int best_epoch = 0;
  std::uint64_t steps = 0;
};

/// Both datasets are resized to the model input scale internally.
FitResult fit(const std::vector<AnnotatedImage>& train, const std::vector<AnnotatedImage>& val,
              Model& model, const TrainConfig& cfg, const FitOptions& opts = {});

/// Validation MAE/RMSE/R2 with each sample's stored exemplars.
MetricsReport validate_model(const Model& model, const std::vector<AnnotatedImage>& val);

}  // namespace lcount
