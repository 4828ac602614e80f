// lcount: synthetic data, training, evaluation, counting and gradient checks.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using namespace lcount;
using namespace lcount::cli;

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

void persist_config(const CLI::App& app, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream os(dir / "run_config.ini");
  os << app.config_to_str(true, false);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exemplar-conditioned local counting"};
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "INI file; [synth], [train], ... sections hold command options");
  app.require_subcommand(1);

  // synth -------------------------------------------------------------------
  SynthArgs sa;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with splits");
  synth->add_option("--n", sa.n, "Number of scenes")->capture_default_str();
  synth->add_option("--seed", sa.config.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Dataset directory");
  synth->add_option("--width", sa.config.width)->capture_default_str();
  synth->add_option("--height", sa.config.height)->capture_default_str();
  synth->add_option("--families", sa.config.families, "disc, ellipse, cluster")->capture_default_str();
  synth->add_option("--count-min", sa.config.count_min)->capture_default_str();
  synth->add_option("--count-max", sa.config.count_max)->capture_default_str();
  synth->add_option("--radius-min", sa.config.radius_min)->capture_default_str();
  synth->add_option("--radius-max", sa.config.radius_max)->capture_default_str();
  synth->add_option("--radius-jitter", sa.config.radius_jitter)->capture_default_str();
  synth->add_option("--distractor-min", sa.config.distractor_min)->capture_default_str();
  synth->add_option("--distractor-max", sa.config.distractor_max)->capture_default_str();
  synth->add_option("--color-jitter", sa.config.color_jitter)->capture_default_str();
  synth->add_option("--max-overlap", sa.config.max_overlap)->capture_default_str();
  synth->add_option("--ratios", sa.ratios, "Split ratios: train,test or train,val,test")
      ->delimiter(',')
      ->capture_default_str();
  synth->add_flag("--disjoint", sa.category_disjoint, "Keep categories disjoint across splits");

  // train -------------------------------------------------------------------
  TrainArgs ta;
  std::string train_out, resume, data_dir, train_split, val_split;
  std::string preset = "tiny";
  double lr = 0;
  int epochs = 0, batch = 0;
  double weight_decay = -1, mosaic_prob = -1;
  std::uint64_t seed = 0, init_seed = 0;
  auto* train = app.add_subcommand("train", "Train a counter");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--train-split", train_split, "Default <data>/splits/train.txt");
  train->add_option("--val-split", val_split, "Default <data>/splits/val.txt");
  train->add_option("--preset", preset, "tiny or base")->check(CLI::IsMember({"tiny", "base"}))->capture_default_str();
  train->add_option("--epochs", epochs, "Override the preset's epoch count");
  train->add_option("--lr", lr, "Override the preset's base learning rate");
  train->add_option("--batch", batch, "Batch size");
  train->add_option("--weight-decay", weight_decay);
  train->add_option("--mosaic-prob", mosaic_prob);
  train->add_option("--seed", seed, "Data order and augmentation seed")->capture_default_str();
  train->add_option("--init-seed", init_seed, "Parameter initialization seed")->capture_default_str();
  train->add_option("--resume", resume, "Checkpoint to continue from");
  train->add_option("--out", train_out, "Output directory");

  // eval --------------------------------------------------------------------
  EvalArgs ea;
  std::string eval_ckpt, eval_data, eval_split, eval_out;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--split", eval_split, "Default <data>/splits/test.txt");
  eval->add_option("--shots", ea.shots, "3 or 1")->capture_default_str();
  eval->add_option("--small-max", ea.small_max, "Small stratum: s below this")->capture_default_str();
  eval->add_option("--large-min", ea.large_min, "Large stratum: s above this")->capture_default_str();
  eval->add_option("--fps-warmup", ea.fps_warmup)->capture_default_str();
  eval->add_option("--fps-iters", ea.fps_iters)->capture_default_str();
  eval->add_option("--fps-repeats", ea.fps_repeats)->capture_default_str();
  eval->add_option("--out", eval_out, "Output directory");

  // count -------------------------------------------------------------------
  CountArgs ca;
  std::string count_ckpt, count_image, count_out;
  auto* count = app.add_subcommand("count", "Count objects in one image");
  count->add_option("--checkpoint", count_ckpt)->required();
  count->add_option("--image", count_image)->required();
  count->add_option("--box", ca.boxes, "Exemplar box x1,y1,x2,y2 (1 to 3)")->required();
  count->add_option("--out", count_out, "Output directory");

  // gradcheck ---------------------------------------------------------------
  GradcheckArgs ga;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  grad->add_option("--eps", ga.eps, "Central-difference step")->capture_default_str();
  grad->add_option("--tol", ga.tol, "Maximum relative error")->capture_default_str();
  grad->add_option("--floor", ga.floor, "Relative-error denominator floor")->capture_default_str();
  grad->add_option("--seeds", ga.seeds)->capture_default_str();
  grad->add_option("--coords", ga.coords, "Sampled coordinates per model tensor")->capture_default_str();
  grad->add_flag("--inject-bug", ga.inject_bug, "Include an op with a wrong backward pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      if (synth_out.empty()) throw std::invalid_argument("--out is required");
      sa.out = synth_out;
      persist_config(app, sa.out);
      return cmd_synth(sa);
    }
    if (train->parsed()) {
      ta.model = preset == "tiny" ? ModelConfig::tiny() : ModelConfig{};
      ta.train = preset == "tiny" ? TrainConfig::tiny() : TrainConfig{};
      if (epochs > 0) ta.train.epochs = epochs;
      if (lr > 0) ta.train.base_lr = lr;
      if (batch > 0) ta.train.batch_size = batch;
      if (weight_decay >= 0) ta.train.weight_decay = weight_decay;
      if (mosaic_prob >= 0) ta.train.mosaic_prob = mosaic_prob;
      ta.train.seed = seed;
      ta.model.init_seed = init_seed;
      ta.data = data_dir;
      ta.train_split = train_split;
      ta.val_split = val_split;
      ta.resume = resume;
      ta.out = train_out.empty() ? default_output_dir("train") : fs::path(train_out);
      persist_config(app, ta.out);
      return cmd_train(ta);
    }
    if (eval->parsed()) {
      ea.checkpoint = eval_ckpt;
      ea.data = eval_data;
      ea.split = eval_split;
      ea.out = eval_out.empty() ? default_output_dir("eval") : fs::path(eval_out);
      persist_config(app, ea.out);
      return cmd_eval(ea);
    }
    if (count->parsed()) {
      ca.checkpoint = count_ckpt;
      ca.image = count_image;
      ca.out = count_out.empty() ? default_output_dir("count") : fs::path(count_out);
      for (const auto& b : ca.boxes) (void)parse_box(b);
      persist_config(app, ca.out);
      return cmd_count(ca);
    }
    if (grad->parsed()) return cmd_gradcheck(ga);
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  }
  return 0;
}
