#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcount/geometry.hpp"

namespace lcount {

/// Architecture of the encoder and the multi-branch counter.
struct ModelConfig {
  long image_size = 384;     // training crop side
  long exemplar_size = 64;   // exemplar patches are resized to this square
  long patch_size = 16;
  long depth = 12;
  long dim = 768;
  long heads = 12;
  long mlp_ratio = 4;
  std::vector<long> block_sizes{32, 64, 128};  // k per branch, pixels
  long output_stride = 16;                     // z shared by all branches, pixels
  BranchThresholds thresholds;                 // needs block_sizes.size() - 1 bounds
  /// Multiplies the scale-embedding map before it enters the patch projection.
  double scale_gain = 1.0 / 128.0;
  std::uint64_t init_seed = 0;

  /// 128 px images, 32 px exemplars, depth 2, width 64.
  static ModelConfig tiny();
  std::size_t branch_count() const { return block_sizes.size(); }
  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

std::string to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace lcount
