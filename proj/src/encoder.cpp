#include "lcount/encoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace lcount {

namespace {

constexpr double kPixelMean = 0.5;
constexpr double kPixelStd = 0.25;
constexpr std::size_t kInputChannels = 4;  // RGB + scale embedding

void check_finite(const Tensor& t, long layer) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite activations after encoder layer " + std::to_string(layer));
    }
  }
}

Grid block_of(const Grid& g, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  Grid out(r1 - r0, c1 - c0);
  for (std::size_t r = r0; r < r1; ++r)
    for (std::size_t c = c0; c < c1; ++c) out.at(r - r0, c - c0) = g.at(r, c);
  return out;
}

}  // namespace

DecoupledAttention decouple_attention(const Grid& scores, std::size_t n_q, std::size_t n_e) {
  const std::size_t n = n_q + n_e;
  if (scores.rows != n || scores.cols != n) {
    throw std::invalid_argument("decouple_attention: scores are " + std::to_string(scores.rows) + "x" +
                                std::to_string(scores.cols) + " but n_q + n_e = " + std::to_string(n));
  }
  return DecoupledAttention{block_of(scores, 0, n_q, 0, n_q), block_of(scores, 0, n_q, n_q, n),
                            block_of(scores, n_q, n, 0, n_q), block_of(scores, n_q, n, n_q, n)};
}

Grid reassemble_attention(const DecoupledAttention& a) {
  const std::size_t n_q = a.query.rows;
  const std::size_t n_e = a.exp.rows;
  const std::size_t n = n_q + n_e;
  Grid g(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      if (r < n_q) {
        g.at(r, c) = c < n_q ? a.query.at(r, c) : a.cls.at(r, c - n_q);
      } else {
        g.at(r, c) = c < n_q ? a.match.at(r - n_q, c) : a.exp.at(r - n_q, c - n_q);
      }
    }
  return g;
}

std::vector<double> sincos_position_embedding(std::size_t grid_h, std::size_t grid_w,
                                              std::size_t dim) {
  std::vector<double> pe(grid_h * grid_w * dim, 0.0);
  const std::size_t quarter = dim / 4;
  for (std::size_t y = 0; y < grid_h; ++y)
    for (std::size_t x = 0; x < grid_w; ++x) {
      double* row = pe.data() + (y * grid_w + x) * dim;
      for (std::size_t i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        row[i] = std::sin(y * omega);
        row[quarter + i] = std::cos(y * omega);
        row[2 * quarter + i] = std::sin(x * omega);
        row[3 * quarter + i] = std::cos(x * omega);
      }
    }
  return pe;
}

Encoder::Encoder(const ModelConfig& cfg, ParameterSet& params, std::mt19937_64& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t d = cfg.dim;
  const std::size_t in = cfg.patch_size * cfg.patch_size * kInputChannels;
  const std::size_t hidden = d * cfg.mlp_ratio;
  patch_w_ = params.add_uniform("patch_embed.weight", {in, d}, in, rng);
  patch_b_ = params.add("patch_embed.bias", {d});
  segment_ = params.add_uniform("segment_embed", {2, d}, d, rng);
  for (long i = 0; i < cfg.depth; ++i) {
    const std::string p = "blocks." + std::to_string(i) + ".";
    Block b;
    b.ln1_g = params.add(p + "ln1.gamma", {d});
    std::fill(b.ln1_g.mutable_data().begin(), b.ln1_g.mutable_data().end(), 1.0);
    b.ln1_b = params.add(p + "ln1.beta", {d});
    b.qkv_w = params.add_uniform(p + "attn.qkv.weight", {d, 3 * d}, d, rng);
    b.qkv_b = params.add(p + "attn.qkv.bias", {3 * d});
    b.proj_w = params.add_uniform(p + "attn.proj.weight", {d, d}, d, rng);
    b.proj_b = params.add(p + "attn.proj.bias", {d});
    b.ln2_g = params.add(p + "ln2.gamma", {d});
    std::fill(b.ln2_g.mutable_data().begin(), b.ln2_g.mutable_data().end(), 1.0);
    b.ln2_b = params.add(p + "ln2.beta", {d});
    b.fc1_w = params.add_uniform(p + "mlp.fc1.weight", {d, hidden}, d, rng);
    b.fc1_b = params.add(p + "mlp.fc1.bias", {hidden});
    b.fc2_w = params.add_uniform(p + "mlp.fc2.weight", {hidden, d}, hidden, rng);
    b.fc2_b = params.add(p + "mlp.fc2.bias", {d});
    blocks_.push_back(std::move(b));
  }
  norm_g_ = params.add("norm.gamma", {d});
  std::fill(norm_g_.mutable_data().begin(), norm_g_.mutable_data().end(), 1.0);
  norm_b_ = params.add("norm.beta", {d});
}

TokenSequence Encoder::tokenize(const Image& image, const ExemplarSet& exemplars) const {
  const long p = cfg_.patch_size;
  if (image.width <= 0 || image.height <= 0 || image.width % p != 0 || image.height % p != 0) {
    throw std::invalid_argument("tokenize: image " + std::to_string(image.width) + "x" +
                                std::to_string(image.height) + " is not divisible by patch size " +
                                std::to_string(p));
  }
  if (exemplars.size() == 0) throw std::invalid_argument("tokenize: at least one exemplar is required");
  const long e = exemplars.patch_size;
  if (e <= 0 || e % p != 0) {
    throw std::invalid_argument("tokenize: exemplar size " + std::to_string(e) +
                                " is not divisible by patch size " + std::to_string(p));
  }
  const std::size_t d = cfg_.dim;
  const std::size_t gh = image.height / p, gw = image.width / p;
  const std::size_t eg = e / p;
  const std::size_t n_q = gh * gw;
  const std::size_t n_e = exemplars.size() * eg * eg;
  const std::size_t n = n_q + n_e;
  const std::size_t in = p * p * kInputChannels;

  std::vector<double> x(n * in, 0.0);
  for (std::size_t ty = 0; ty < gh; ++ty)
    for (std::size_t tx = 0; tx < gw; ++tx) {
      double* row = x.data() + (ty * gw + tx) * in;
      for (long yy = 0; yy < p; ++yy)
        for (long xx = 0; xx < p; ++xx) {
          const auto* px = image.px(static_cast<int>(tx * p + xx), static_cast<int>(ty * p + yy));
          double* dst = row + (yy * p + xx) * kInputChannels;
          for (int c = 0; c < 3; ++c) dst[c] = (px[c] / 255.0 - kPixelMean) / kPixelStd;
        }
    }
  for (std::size_t k = 0; k < exemplars.size(); ++k) {
    const auto& patch = exemplars.patches[k];
    const auto& smap = exemplars.scale_maps[k];
    for (std::size_t ty = 0; ty < eg; ++ty)
      for (std::size_t tx = 0; tx < eg; ++tx) {
        double* row = x.data() + (n_q + k * eg * eg + ty * eg + tx) * in;
        for (long yy = 0; yy < p; ++yy)
          for (long xx = 0; xx < p; ++xx) {
            const std::size_t py = ty * p + yy, pxx = tx * p + xx;
            const double* src = patch.data() + (py * e + pxx) * 3;
            double* dst = row + (yy * p + xx) * kInputChannels;
            for (int c = 0; c < 3; ++c) dst[c] = (src[c] - kPixelMean) / kPixelStd;
            dst[3] = smap.at(py, pxx) * cfg_.scale_gain;
          }
      }
  }

  std::vector<double> pos(n * d, 0.0);
  const auto pe_img = sincos_position_embedding(gh, gw, d);
  std::copy(pe_img.begin(), pe_img.end(), pos.begin());
  const auto pe_ex = sincos_position_embedding(eg, eg, d);
  for (std::size_t k = 0; k < exemplars.size(); ++k) {
    std::copy(pe_ex.begin(), pe_ex.end(), pos.begin() + (n_q + k * eg * eg) * d);
  }
  std::vector<double> onehot(n * 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) onehot[i * 2 + (i < n_q ? 0 : 1)] = 1.0;

  Tensor emb = add(matmul(Tensor({n, in}, std::move(x)), patch_w_), patch_b_);
  emb = add(emb, Tensor({n, d}, std::move(pos)));
  emb = add(emb, matmul(Tensor({n, 2}, std::move(onehot)), segment_));
  return TokenSequence{emb, n_q, n_e, gh, gw};
}

Tensor Encoder::attention(const Tensor& x, const Block& b, bool last, const TokenSequence& seq,
                          double magnitude, Tensor* match_map,
                          std::vector<DecoupledAttention>* captured) const {
  const std::size_t d = cfg_.dim;
  const std::size_t heads = cfg_.heads;
  const std::size_t dh = d / heads;
  const double temperature = std::sqrt(static_cast<double>(dh));
  const Tensor qkv = add(matmul(x, b.qkv_w), b.qkv_b);
  std::vector<Tensor> outs;
  Tensor match_sum;
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor q = slice(qkv, 1, h * dh, (h + 1) * dh);
    const Tensor k = slice(qkv, 1, d + h * dh, d + (h + 1) * dh);
    const Tensor v = slice(qkv, 1, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    const Tensor scores = matmul(q, transpose(k));
    outs.push_back(matmul(softmax_rows(scores, temperature), v));
    if (!last) continue;
    if (captured) {
      captured->push_back(decouple_attention(Grid(seq.total(), seq.total(), scores.values()),
                                             seq.n_image, seq.n_exemplar));
    }
    const Tensor match = slice(slice(scores, 0, seq.n_image, seq.total()), 1, 0, seq.n_image);
    const Tensor per_head = mean_rows(softmax_rows(match, temperature));
    match_sum = match_sum.defined() ? add(match_sum, per_head) : per_head;
  }
  if (last) *match_map = scale(match_sum, magnitude / static_cast<double>(heads));
  const Tensor merged = heads == 1 ? outs.front() : concat(outs, 1);
  return add(matmul(merged, b.proj_w), b.proj_b);
}

EncoderOutput Encoder::encode(const TokenSequence& seq, double magnitude,
                              const EncodeOptions& opts) const {
  if (seq.n_exemplar == 0) throw std::invalid_argument("encode: sequence holds no exemplar tokens");
  EncoderOutput out;
  Tensor x = seq.tokens;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    const bool last = i + 1 == blocks_.size();
    const Tensor h = layernorm(x, b.ln1_g, b.ln1_b);
    x = add(x, attention(h, b, last, seq, magnitude, &out.match_map,
                         opts.capture_attention ? &out.heads : nullptr));
    const Tensor h2 = layernorm(x, b.ln2_g, b.ln2_b);
    x = add(x, add(matmul(gelu(add(matmul(h2, b.fc1_w), b.fc1_b)), b.fc2_w), b.fc2_b));
    check_finite(x, static_cast<long>(i));
  }
  const Tensor image_tokens = slice(x, 0, 0, seq.n_image);
  out.features = layernorm(image_tokens, norm_g_, norm_b_);
  const Tensor column = reshape(out.match_map, {seq.n_image, 1});
  out.enhanced = reshape(concat({out.features, column}, 1),
                         {seq.grid_h, seq.grid_w, static_cast<std::size_t>(cfg_.dim) + 1});
  out.match_grid = Grid(seq.grid_h, seq.grid_w, out.match_map.values());
  return out;
}

}  // namespace lcount
