#pragma once

// Joint image/exemplar tokenization and the transformer encoder whose last
// block exposes its attention scores split into image/exemplar quadrants.

#include <cstddef>
#include <random>
#include <vector>

#include "lcount/config.hpp"
#include "lcount/geometry.hpp"
#include "lcount/grid.hpp"
#include "lcount/image.hpp"
#include "lcount/params.hpp"
#include "lcount/tensor.hpp"

namespace lcount {

/// Image tokens first, then the tokens of each exemplar in order.
struct TokenSequence {
  Tensor tokens;  // [(n_image + n_exemplar) x dim]
  std::size_t n_image = 0;
  std::size_t n_exemplar = 0;
  std::size_t grid_h = 0;  // image token grid
  std::size_t grid_w = 0;

  std::size_t total() const { return n_image + n_exemplar; }
};

/// Quadrants of an N x N score matrix with image tokens first:
///   [ query  class ]
///   [ match  exp   ]
struct DecoupledAttention {
  Grid query;  // n_q x n_q, image -> image
  Grid cls;    // n_q x n_e
  Grid match;  // n_e x n_q, exemplar rows against image columns
  Grid exp;    // n_e x n_e
};

DecoupledAttention decouple_attention(const Grid& scores, std::size_t n_q, std::size_t n_e);
/// Inverse of decouple_attention.
Grid reassemble_attention(const DecoupledAttention& a);

struct EncodeOptions {
  /// Keep a per-head copy of the last block's quadrants in the output.
  bool capture_attention = false;
};

struct EncoderOutput {
  Tensor features;   // [n_q x dim], after the final layer norm
  Tensor match_map;  // [n_q], head/exemplar-averaged match attention times M_e
  Tensor enhanced;   // [grid_h x grid_w x (dim + 1)], features with match_map appended
  Grid match_grid;   // match_map values on the image token grid
  /// Last-block pre-softmax scores Q_h K_h^T per head, decoupled.
  std::vector<DecoupledAttention> heads;
};

class Encoder {
 public:
  /// Registers all encoder parameters in `params` and draws their initial values.
  Encoder(const ModelConfig& cfg, ParameterSet& params, std::mt19937_64& rng);

  /// Rejects image or exemplar sizes that are not multiples of the patch size.
  TokenSequence tokenize(const Image& image, const ExemplarSet& exemplars) const;

  /// Throws std::runtime_error naming the layer when activations turn non-finite.
  EncoderOutput encode(const TokenSequence& seq, double magnitude,
                       const EncodeOptions& opts = {}) const;

 private:
  struct Block {
    Tensor ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b;
    Tensor ln2_g, ln2_b, fc1_w, fc1_b, fc2_w, fc2_b;
  };

  Tensor attention(const Tensor& x, const Block& b, bool last, const TokenSequence& seq,
                   double magnitude, Tensor* match_map,
                   std::vector<DecoupledAttention>* captured) const;

  ModelConfig cfg_;
  Tensor patch_w_, patch_b_, segment_;
  Tensor norm_g_, norm_b_;
  std::vector<Block> blocks_;
};

/// Fixed 2-D sine/cosine positional embedding for a grid_h x grid_w token grid:
/// the first half of the channels encode the row, the second half the column.
std::vector<double> sincos_position_embedding(std::size_t grid_h, std::size_t grid_w,
                                              std::size_t dim);

}  // namespace lcount
