#include "lcount/config.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace lcount {

using nlohmann::json;

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.image_size = 128;
  c.exemplar_size = 32;
  c.patch_size = 16;
  c.depth = 2;
  c.dim = 64;
  c.heads = 4;
  c.scale_gain = 1.0 / 64.0;
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
  if (patch_size <= 0) fail("patch_size must be positive");
  if (image_size <= 0 || image_size % patch_size != 0) fail("image_size must be a positive multiple of patch_size");
  if (exemplar_size <= 0 || exemplar_size % patch_size != 0) {
    fail("exemplar_size must be a positive multiple of patch_size");
  }
  if (depth < 1) fail("depth must be at least 1");
  if (dim < 1 || heads < 1 || dim % heads != 0) fail("dim must be a positive multiple of heads");
  if (mlp_ratio < 1) fail("mlp_ratio must be at least 1");
  if (block_sizes.empty()) fail("at least one counter branch is required");
  for (long k : block_sizes) {
    if (k < patch_size || k % patch_size != 0) fail("every block size must be a multiple of patch_size and >= it");
  }
  if (output_stride < patch_size || output_stride % patch_size != 0) {
    fail("output_stride must be a positive multiple of patch_size");
  }
  if (thresholds.bounds.size() + 1 != block_sizes.size()) {
    fail("need exactly one threshold fewer than branches");
  }
  thresholds.validate();
}

std::string to_json(const ModelConfig& c) {
  json j = {{"image_size", c.image_size},       {"exemplar_size", c.exemplar_size},
            {"patch_size", c.patch_size},       {"depth", c.depth},
            {"dim", c.dim},                     {"heads", c.heads},
            {"mlp_ratio", c.mlp_ratio},         {"block_sizes", c.block_sizes},
            {"output_stride", c.output_stride}, {"thresholds", c.thresholds.bounds},
            {"scale_gain", c.scale_gain},       {"init_seed", c.init_seed}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig c;
  c.image_size = j.at("image_size").get<long>();
  c.exemplar_size = j.at("exemplar_size").get<long>();
  c.patch_size = j.at("patch_size").get<long>();
  c.depth = j.at("depth").get<long>();
  c.dim = j.at("dim").get<long>();
  c.heads = j.at("heads").get<long>();
  c.mlp_ratio = j.at("mlp_ratio").get<long>();
  c.block_sizes = j.at("block_sizes").get<std::vector<long>>();
  c.output_stride = j.at("output_stride").get<long>();
  c.thresholds.bounds = j.at("thresholds").get<std::vector<double>>();
  c.scale_gain = j.at("scale_gain").get<double>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  c.validate();
  return c;
}

}  // namespace lcount
