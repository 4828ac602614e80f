#pragma once

// The full counter: shared encoder plus one BranchCounter per block size,
// inference on arbitrary images, and the binary checkpoint format.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcount/config.hpp"
#include "lcount/counter.hpp"
#include "lcount/encoder.hpp"
#include "lcount/geometry.hpp"
#include "lcount/normalize.hpp"
#include "lcount/params.hpp"

namespace lcount {

struct ForwardResult {
  EncoderOutput encoded;
  std::vector<RedundantCountMap> maps;  // every branch in train mode, the selected one in infer mode
};

struct Prediction {
  double count = 0.0;
  std::size_t branch = 0;  // zero-based
  double scale_prior = 0.0;
  double magnitude = 0.0;
  NormalizedCountMap count_map;
  Grid match_map;
  Image input;  // the image as the encoder saw it
};

class Model {
 public:
  /// Builds and initializes all parameters from cfg.init_seed.
  explicit Model(const ModelConfig& cfg);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const std::vector<BranchCounter>& branches() const { return branches_; }

  /// `image` must already have patch-aligned dimensions.
  ForwardResult forward(const Image& image, const ExemplarSet& exemplars, CountMode mode,
                        const EncodeOptions& opts = {}) const;

  /// Resizes `image` so its short side is cfg.image_size and both sides are
  /// patch multiples, maps `boxes` (given in original pixel coordinates) along,
  /// and runs single-branch inference without recording a graph.
  Prediction predict(const Image& image, std::span<const ExemplarBox> boxes) const;

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  std::mt19937_64 init_rng_;  // declared before the modules it initializes
  Encoder encoder_;
  std::vector<BranchCounter> branches_;
};

/// Image and box transform used by Model::predict.
struct PreparedInput {
  Image image;
  std::vector<ExemplarBox> boxes;
};
PreparedInput prepare_input(const Image& image, std::span<const ExemplarBox> boxes,
                            long short_side, long patch);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer moments and free-form training metadata stored with the weights.
struct CheckpointExtras {
  std::uint64_t adam_step = 0;
  std::vector<std::vector<double>> adam_m;  // empty when no optimizer state
  std::vector<std::vector<double>> adam_v;
  std::string meta_json = "{}";
};

// Layout (little-endian):
//   "LCKP" u32 version
//   u64 n, n bytes of ModelConfig JSON
//   u64 count; per tensor: u32 name length, name, u32 rank, rank x u64 dims, f64 values
//   u64 adam_step, u8 has_moments, [per tensor: f64 m values, f64 v values]
//   u64 n, n bytes of metadata JSON
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointExtras& extras = {});
/// Throws CheckpointError on a bad file, a missing tensor or a shape mismatch.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path,
                                       CheckpointExtras* extras = nullptr);
/// Loads weights into an existing model whose configuration must match.
void load_checkpoint_into(const std::filesystem::path& path, Model& model,
                          CheckpointExtras* extras = nullptr);

}  // namespace lcount
