#include "lcount/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace lcount {

namespace {

std::vector<BranchCounter> make_branches(const ModelConfig& cfg, ParameterSet& params,
                                         std::mt19937_64& rng) {
  std::vector<BranchCounter> out;
  for (std::size_t b = 0; b < cfg.branch_count(); ++b) out.emplace_back(b, cfg.dim, params, rng);
  return out;
}

const ModelConfig& checked(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Model::Model(const ModelConfig& cfg)
    : cfg_(checked(cfg)),
      init_rng_(cfg_.init_seed),
      encoder_(cfg_, params_, init_rng_),
      branches_(make_branches(cfg_, params_, init_rng_)) {}

ForwardResult Model::forward(const Image& image, const ExemplarSet& exemplars, CountMode mode,
                             const EncodeOptions& opts) const {
  ForwardResult r;
  const TokenSequence seq = encoder_.tokenize(image, exemplars);
  r.encoded = encoder_.encode(seq, exemplars.magnitude, opts);
  r.maps = count_multibranch(r.encoded.enhanced, exemplars, branches_, cfg_, mode);
  return r;
}

PreparedInput prepare_input(const Image& image, std::span<const ExemplarBox> boxes,
                            long short_side, long patch) {
  if (image.empty()) throw std::invalid_argument("predict: empty image");
  const double f = static_cast<double>(short_side) / std::min(image.width, image.height);
  auto aligned = [&](int side) {
    const long v = std::lround(side * f / patch) * patch;
    return static_cast<int>(std::max(patch, v));
  };
  PreparedInput p;
  const int w = aligned(image.width), h = aligned(image.height);
  p.image = (w == image.width && h == image.height) ? image : resize_bilinear(image, w, h);
  const double fx = static_cast<double>(w) / image.width;
  const double fy = static_cast<double>(h) / image.height;
  for (const auto& b : boxes) {
    validate_box(b, image.width, image.height);
    p.boxes.push_back({b.x1 * fx, b.y1 * fy, std::min(b.x2 * fx, static_cast<double>(w)),
                       std::min(b.y2 * fy, static_cast<double>(h))});
  }
  return p;
}

Prediction Model::predict(const Image& image, std::span<const ExemplarBox> boxes) const {
  if (boxes.empty() || boxes.size() > kMaxExemplars) {
    throw std::invalid_argument("predict: expected 1 to 3 exemplar boxes, got " +
                                std::to_string(boxes.size()));
  }
  PreparedInput in = prepare_input(image, boxes, cfg_.image_size, cfg_.patch_size);
  const ExemplarSet ex = make_exemplar_set(in.image, in.boxes, cfg_.exemplar_size);
  NoGradGuard guard;
  ForwardResult r = forward(in.image, ex, CountMode::kInfer);
  Prediction p;
  p.branch = r.maps.front().branch;
  p.scale_prior = ex.scale_prior;
  p.magnitude = ex.magnitude;
  p.count_map = normalize(r.maps.front());
  p.count = p.count_map.total;
  p.match_map = r.encoded.match_grid;
  p.input = std::move(in.image);
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& p) : os_(p, std::ios::binary) {
    if (!os_) throw CheckpointError("cannot write checkpoint " + p.string());
  }
  template <typename T>
  void pod(const T& v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void bytes(const void* d, std::size_t n) { os_.write(static_cast<const char*>(d), static_cast<std::streamsize>(n)); }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void doubles(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  void finish(const std::filesystem::path& p) {
    os_.flush();
    if (!os_) throw CheckpointError("write failed: " + p.string());
  }

 private:
  std::ofstream os_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& p) : path_(p), is_(p, std::ios::binary) {
    if (!is_) throw CheckpointError("cannot open checkpoint " + p.string());
  }
  template <typename T>
  T pod() {
    T v{};
    bytes(&v, sizeof v);
    return v;
  }
  void bytes(void* d, std::size_t n) {
    is_.read(static_cast<char*>(d), static_cast<std::streamsize>(n));
    if (!is_) throw CheckpointError(path_.string() + ": truncated checkpoint");
  }
  std::string str(std::size_t limit = 1u << 26) { return chars(pod<std::uint64_t>(), limit); }
  std::string name() { return chars(pod<std::uint32_t>(), 4096); }
  std::string chars(std::uint64_t n, std::size_t limit) {
    if (n > limit) throw CheckpointError(path_.string() + ": corrupt string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream is_;
};

ModelConfig read_header(Reader& r) {
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointError(r.path().string() + ": not a checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) {
    throw CheckpointError(r.path().string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  try {
    return model_config_from_json(r.str());
  } catch (const std::exception& e) {
    throw CheckpointError(r.path().string() + ": bad model config: " + e.what());
  }
}

void read_body(Reader& r, Model& model, CheckpointExtras* extras) {
  auto& params = model.params();
  const auto count = r.pod<std::uint64_t>();
  if (count != params.size()) {
    throw CheckpointError(r.path().string() + ": checkpoint holds " + std::to_string(count) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.name();
    if (!params.contains(name)) throw CheckpointError(r.path().string() + ": unknown tensor " + name);
    Tensor& t = params.get(name);
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw CheckpointError(r.path().string() + ": corrupt rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = r.pod<std::uint64_t>();
    if (shape != t.shape()) {
      throw CheckpointError(r.path().string() + ": shape mismatch for " + name + ": checkpoint " +
                            shape_str(shape) + ", model " + shape_str(t.shape()));
    }
    r.bytes(t.mutable_data().data(), t.numel() * sizeof(double));
  }
  CheckpointExtras ex;
  ex.adam_step = r.pod<std::uint64_t>();
  if (r.pod<std::uint8_t>() != 0) {
    // Moments are stored in parameter-set order.
    for (const auto& t : params.tensors()) {
      std::vector<double> m(t.numel()), v(t.numel());
      r.bytes(m.data(), m.size() * sizeof(double));
      r.bytes(v.data(), v.size() * sizeof(double));
      ex.adam_m.push_back(std::move(m));
      ex.adam_v.push_back(std::move(v));
    }
  }
  ex.meta_json = r.str();
  if (extras != nullptr) *extras = std::move(ex);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const CheckpointExtras& extras) {
  const auto& params = model.params();
  const bool moments = !extras.adam_m.empty();
  if (moments && (extras.adam_m.size() != params.size() || extras.adam_v.size() != params.size())) {
    throw CheckpointError("save_checkpoint: optimizer state does not match the parameter set");
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    Writer w(tmp);
    w.bytes(kMagic, 4);
    w.pod(kVersion);
    w.str(to_json(model.config()));
    w.pod<std::uint64_t>(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor& t = params.tensors()[i];
      const std::string& name = params.names()[i];
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
      w.bytes(name.data(), name.size());
      w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
      for (std::size_t d : t.shape()) w.pod<std::uint64_t>(d);
      w.doubles(t.data());
    }
    w.pod<std::uint64_t>(extras.adam_step);
    w.pod<std::uint8_t>(moments ? 1 : 0);
    if (moments) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (extras.adam_m[i].size() != params.tensors()[i].numel() ||
            extras.adam_v[i].size() != params.tensors()[i].numel()) {
          throw CheckpointError("save_checkpoint: optimizer state size mismatch for " + params.names()[i]);
        }
        w.doubles(extras.adam_m[i]);
        w.doubles(extras.adam_v[i]);
      }
    }
    w.str(extras.meta_json);
    w.finish(tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, CheckpointExtras* extras) {
  Reader r(path);
  const ModelConfig cfg = read_header(r);
  std::unique_ptr<Model> model;
  try {
    model = std::make_unique<Model>(cfg);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  read_body(r, *model, extras);
  return model;
}

void load_checkpoint_into(const std::filesystem::path& path, Model& model, CheckpointExtras* extras) {
  Reader r(path);
  const ModelConfig cfg = read_header(r);
  ModelConfig a = cfg, b = model.config();
  a.init_seed = b.init_seed = 0;
  if (!(a == b)) {
    throw CheckpointError(path.string() + ": model configuration differs from the checkpoint (" +
                          to_json(cfg) + ")");
  }
  read_body(r, model, extras);
}

}  // namespace lcount
