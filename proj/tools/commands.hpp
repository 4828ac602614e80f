#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lcount/config.hpp"
#include "lcount/dataset.hpp"
#include "lcount/training.hpp"

namespace lcount::cli {

struct SynthArgs {
  SynthConfig config;
  int n = 200;
  std::vector<double> ratios{0.7, 0.15, 0.15};
  bool category_disjoint = false;
  std::filesystem::path out;
};

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path train_split;  // default <data>/splits/train.txt
  std::filesystem::path val_split;    // default <data>/splits/val.txt
  std::string preset = "tiny";
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path resume;
  std::filesystem::path out;
};

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path split;  // default <data>/splits/test.txt
  int shots = 3;
  double small_max = 32.0;
  double large_min = 96.0;
  int fps_warmup = 5;
  int fps_iters = 30;
  int fps_repeats = 3;
  std::filesystem::path out;
};

struct CountArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::vector<std::string> boxes;  // "x1,y1,x2,y2"
  std::filesystem::path out;
};

struct GradcheckArgs {
  double eps = 1e-5;
  double tol = 1e-4;
  double floor = 1e-6;
  int seeds = 5;
  int coords = 8;
  bool inject_bug = false;
};

int cmd_synth(const SynthArgs& a);
int cmd_train(const TrainArgs& a);
int cmd_eval(const EvalArgs& a);
int cmd_count(const CountArgs& a);
int cmd_gradcheck(const GradcheckArgs& a);

/// Parses "x1,y1,x2,y2"; throws std::invalid_argument on malformed text.
ExemplarBox parse_box(const std::string& text);

/// $LCOUNT_OUTPUT_ROOT (or "runs") / <command>-<UTC timestamp>.
std::filesystem::path default_output_dir(const std::string& command);

}  // namespace lcount::cli
