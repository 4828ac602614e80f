#include "lcount/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lcount {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

void validate(const AnnotatedImage& a) {
  auto fail = [&](const std::string& why) {
    throw DatasetError(a.image_path + ": " + why);
  };
  if (a.image_path.empty()) throw DatasetError("annotation: empty image identifier");
  if (a.category.empty()) fail("empty category");
  if (a.boxes.empty()) fail("no exemplar boxes");
  if (a.boxes.size() > kMaxExemplars) {
    fail(std::to_string(a.boxes.size()) + " exemplar boxes (at most " +
         std::to_string(kMaxExemplars) + ")");
  }
  if (a.width <= 0 || a.height <= 0) fail("unknown image dimensions");
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    const auto& p = a.points[i];
    if (!(p.x >= 0 && p.x < a.width && p.y >= 0 && p.y < a.height)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "point %zu (%g, %g) outside %dx%d image", i, p.x, p.y,
                    a.width, a.height);
      fail(buf);
    }
  }
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    try {
      validate_box(a.boxes[i], a.width, a.height);
    } catch (const std::invalid_argument& e) {
      fail("box " + std::to_string(i) + ": " + e.what());
    }
  }
}

std::string to_record(const AnnotatedImage& a) {
  ojson j;
  j["image"] = a.image_path;
  j["points"] = ojson::array();
  for (const auto& p : a.points) j["points"].push_back({p.x, p.y});
  j["boxes"] = ojson::array();
  for (const auto& b : a.boxes) j["boxes"].push_back({b.x1, b.y1, b.x2, b.y2});
  j["category"] = a.category;
  return j.dump();
}

AnnotatedImage parse_record(const std::string& line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const std::exception& e) {
    throw DatasetError(std::string("malformed annotation record: ") + e.what());
  }
  AnnotatedImage a;
  const std::string id = j.is_object() && j.contains("image") && j["image"].is_string()
                             ? j["image"].get<std::string>()
                             : std::string("<unknown>");
  auto fail = [&](const std::string& why) { throw DatasetError(id + ": " + why); };
  if (!j.is_object()) fail("record is not an object");
  for (const char* key : {"image", "points", "boxes", "category"}) {
    if (!j.contains(key)) fail(std::string("missing field \"") + key + "\"");
  }
  if (!j["image"].is_string() || !j["category"].is_string()) fail("image and category must be strings");
  a.image_path = id;
  a.category = j["category"].get<std::string>();
  if (!j["points"].is_array() || !j["boxes"].is_array()) fail("points and boxes must be arrays");
  for (const auto& p : j["points"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      fail("point must be [x, y]");
    }
    a.points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  for (const auto& b : j["boxes"]) {
    if (!b.is_array() || b.size() != 4) fail("box must be [x1, y1, x2, y2]");
    for (const auto& v : b)
      if (!v.is_number()) fail("box coordinates must be numbers");
    a.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
  }
  return a;
}

void write_annotations(const fs::path& path, const std::vector<AnnotatedImage>& items) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DatasetError("cannot write " + path.string());
  for (const auto& a : items) os << to_record(a) << '\n';
  if (!os) throw DatasetError("write failed: " + path.string());
}

std::vector<AnnotatedImage> read_annotations(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError("missing annotation file " + path.string());
  std::vector<AnnotatedImage> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const DatasetError& e) {
      throw DatasetError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> read_split_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DatasetError("missing split file " + path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(is, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

std::vector<AnnotatedImage> load_dataset(const fs::path& root, const fs::path& split_file,
                                         bool load_rasters) {
  const auto ids = read_split_file(split_file);
  auto records = read_annotations(root / "annotations.jsonl");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) index[records[i].image_path] = i;
  std::vector<AnnotatedImage> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw DatasetError(id + ": listed in split but has no annotation record");
    AnnotatedImage a = records[it->second];
    const fs::path img = root / "images" / id;
    if (!fs::exists(img)) throw DatasetError(id + ": missing image file " + img.string());
    if (load_rasters) {
      a.raster = load_image(img);
      a.width = a.raster.width;
      a.height = a.raster.height;
    } else {
      std::tie(a.width, a.height) = read_image_size(img);
    }
    validate(a);
    out.push_back(std::move(a));
  }
  return out;
}

AnnotatedImage resize_shortest_side(const AnnotatedImage& a, int target) {
  if (target <= 0) throw std::invalid_argument("resize_shortest_side: target must be positive");
  const int shortest = std::min(a.width, a.height);
  if (shortest == target) return a;
  const double f = static_cast<double>(target) / shortest;
  AnnotatedImage out = a;
  if (a.width <= a.height) {
    out.width = target;
    out.height = static_cast<int>(std::max(1L, std::lround(a.height * f)));
  } else {
    out.height = target;
    out.width = static_cast<int>(std::max(1L, std::lround(a.width * f)));
  }
  for (auto& p : out.points) {
    p.x = std::min(p.x * f, std::nextafter(static_cast<double>(out.width), 0.0));
    p.y = std::min(p.y * f, std::nextafter(static_cast<double>(out.height), 0.0));
  }
  for (auto& b : out.boxes) {
    b.x1 = b.x1 * f;
    b.y1 = b.y1 * f;
    b.x2 = std::min(b.x2 * f, static_cast<double>(out.width));
    b.y2 = std::min(b.y2 * f, static_cast<double>(out.height));
  }
  if (!a.raster.empty()) out.raster = resize_bilinear(a.raster, out.width, out.height);
  return out;
}

AnnotatedImage crop_training_patch(const AnnotatedImage& a, int size, std::mt19937_64& rng) {
  if (a.width < size || a.height < size) {
    throw std::invalid_argument("crop_training_patch: " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " image is smaller than crop " +
                                std::to_string(size));
  }
  std::uniform_int_distribution<int> dx(0, a.width - size), dy(0, a.height - size);
  const int ox = dx(rng);
  const int oy = dy(rng);
  AnnotatedImage out;
  out.image_path = a.image_path;
  out.category = a.category;
  out.width = size;
  out.height = size;
  for (const auto& p : a.points) {
    const double x = p.x - ox, y = p.y - oy;
    if (x >= 0 && x < size && y >= 0 && y < size) out.points.push_back({x, y});
  }
  for (const auto& b : a.boxes) out.boxes.push_back({b.x1 - ox, b.y1 - oy, b.x2 - ox, b.y2 - oy});
  if (!a.raster.empty()) out.raster = crop(a.raster, ox, oy, size, size);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

void SynthConfig::validate() const {
  if (width < 8 || height < 8) throw std::invalid_argument("synth: canvas must be at least 8x8");
  if (families.empty()) throw std::invalid_argument("synth: no shape families");
  for (const auto& f : families) {
    if (f != "disc" && f != "ellipse" && f != "cluster") {
      throw std::invalid_argument("synth: unknown shape family '" + f + "'");
    }
  }
  if (count_min < 0 || count_max < count_min) {
    throw std::invalid_argument("synth: count range must satisfy 0 <= min <= max");
  }
  if (count_max == 0) {
    throw std::invalid_argument("synth: count range [0,0] can never produce a scene with targets");
  }
  if (!(radius_min > 0) || radius_max < radius_min) {
    throw std::invalid_argument("synth: radius range must satisfy 0 < min <= max");
  }
  if (2 * radius_max >= std::min(width, height)) {
    throw std::invalid_argument("synth: radius_max too large for the canvas");
  }
  if (radius_jitter < 0 || radius_jitter >= 1) throw std::invalid_argument("synth: radius_jitter must be in [0,1)");
  if (distractor_min < 0 || distractor_max < distractor_min) {
    throw std::invalid_argument("synth: distractor range must satisfy 0 <= min <= max");
  }
  if (color_jitter < 0 || color_jitter > 0.5) throw std::invalid_argument("synth: color_jitter must be in [0,0.5]");
  if (max_overlap < 0 || max_overlap >= 1) throw std::invalid_argument("synth: max_overlap must be in [0,1)");
  if (placement_attempts < 1) throw std::invalid_argument("synth: placement_attempts must be positive");
}

std::string to_json(const SynthConfig& c) {
  ojson j;
  j["width"] = c.width;
  j["height"] = c.height;
  j["families"] = c.families;
  j["count_min"] = c.count_min;
  j["count_max"] = c.count_max;
  j["radius_min"] = c.radius_min;
  j["radius_max"] = c.radius_max;
  j["radius_jitter"] = c.radius_jitter;
  j["distractor_min"] = c.distractor_min;
  j["distractor_max"] = c.distractor_max;
  j["color_jitter"] = c.color_jitter;
  j["max_overlap"] = c.max_overlap;
  j["placement_attempts"] = c.placement_attempts;
  j["seed"] = c.seed;
  return j.dump(2);
}

SynthConfig synth_config_from_json(const std::string& text) {
  const auto j = ojson::parse(text);
  SynthConfig c;
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.families = j.value("families", c.families);
  c.count_min = j.value("count_min", c.count_min);
  c.count_max = j.value("count_max", c.count_max);
  c.radius_min = j.value("radius_min", c.radius_min);
  c.radius_max = j.value("radius_max", c.radius_max);
  c.radius_jitter = j.value("radius_jitter", c.radius_jitter);
  c.distractor_min = j.value("distractor_min", c.distractor_min);
  c.distractor_max = j.value("distractor_max", c.distractor_max);
  c.color_jitter = j.value("color_jitter", c.color_jitter);
  c.max_overlap = j.value("max_overlap", c.max_overlap);
  c.placement_attempts = j.value("placement_attempts", c.placement_attempts);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

struct Palette {
  const char* name;
  double rgb[3];
};

constexpr Palette kColors[] = {
    {"red", {0.85, 0.15, 0.12}},    {"yellow", {0.95, 0.85, 0.15}},
    {"white", {0.94, 0.94, 0.90}},  {"blue", {0.20, 0.35, 0.90}},
    {"purple", {0.60, 0.25, 0.75}}, {"cyan", {0.20, 0.85, 0.85}},
};
constexpr int kColorCount = static_cast<int>(std::size(kColors));

struct Shape {
  int family;  // index into config.families
  double cx, cy, r;
  double aspect, angle;  // ellipse minor/major ratio and orientation; cluster phase
  double rgb[3];
};

// Inside test in the shape's local frame; returns shading factor or <0 when outside.
double shape_coverage(const Shape& s, const std::string& family, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  if (family == "disc") {
    const double d2 = (dx * dx + dy * dy) / (s.r * s.r);
    return d2 <= 1.0 ? 1.0 - 0.35 * d2 : -1.0;
  }
  if (family == "ellipse") {
    const double c = std::cos(s.angle), sn = std::sin(s.angle);
    const double u = (c * dx + sn * dy) / s.r;
    const double v = (-sn * dx + c * dy) / (s.r * s.aspect);
    const double d2 = u * u + v * v;
    return d2 <= 1.0 ? 1.0 - 0.35 * d2 : -1.0;
  }
  // cluster: four lobes around the centre
  const double lr = s.r / 2.1;
  double best = -1.0;
  for (int i = 0; i < 4; ++i) {
    const double a = s.angle + i * (M_PI / 2);
    const double lx = s.cx + (s.r - lr) * std::cos(a);
    const double ly = s.cy + (s.r - lr) * std::sin(a);
    const double d2 = ((x - lx) * (x - lx) + (y - ly) * (y - ly)) / (lr * lr);
    if (d2 <= 1.0) best = std::max(best, 1.0 - 0.35 * d2);
  }
  return best;
}

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

struct PaintedBox {
  int x0, y0, x1, y1;  // half-open, x1 == x0 when nothing painted
};

PaintedBox paint(Image& img, const Shape& s, const std::string& family) {
  PaintedBox box{img.width, img.height, -1, -1};
  const int xa = std::max(0, static_cast<int>(std::floor(s.cx - s.r)) - 1);
  const int xb = std::min(img.width - 1, static_cast<int>(std::ceil(s.cx + s.r)) + 1);
  const int ya = std::max(0, static_cast<int>(std::floor(s.cy - s.r)) - 1);
  const int yb = std::min(img.height - 1, static_cast<int>(std::ceil(s.cy + s.r)) + 1);
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x) {
      const double shade = shape_coverage(s, family, x + 0.5, y + 0.5);
      if (shade < 0) continue;
      auto* p = img.px(x, y);
      for (int c = 0; c < 3; ++c) p[c] = to_u8(s.rgb[c] * shade);
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
    }
  return box;
}

AnnotatedImage render_scene(const SynthConfig& cfg, std::mt19937_64& rng, int n_targets) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int nf = static_cast<int>(cfg.families.size());
  const int family = std::uniform_int_distribution<int>(0, nf - 1)(rng);
  const int color = std::uniform_int_distribution<int>(0, kColorCount - 1)(rng);

  // Soil-like background: base tone, a low-frequency gradient and pixel noise.
  Image img(cfg.width, cfg.height);
  const double base[3] = {0.30 + 0.12 * u01(rng), 0.22 + 0.10 * u01(rng), 0.12 + 0.08 * u01(rng)};
  const double gx = (u01(rng) - 0.5) * 0.15, gy = (u01(rng) - 0.5) * 0.15;
  std::normal_distribution<double> noise(0.0, 0.025);
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x) {
      const double t = gx * x / cfg.width + gy * y / cfg.height;
      const double n = noise(rng);
      auto* p = img.px(x, y);
      for (int c = 0; c < 3; ++c) p[c] = to_u8(base[c] + t + n);
    }

  const double log_lo = std::log(cfg.radius_min), log_hi = std::log(cfg.radius_max);
  const double base_r = std::exp(log_lo + (log_hi - log_lo) * u01(rng));
  auto draw_radius = [&] {
    const double j = 1.0 + cfg.radius_jitter * (2.0 * u01(rng) - 1.0);
    return std::clamp(base_r * j, cfg.radius_min, cfg.radius_max);
  };

  std::vector<Shape> placed;
  auto try_place = [&](Shape s) -> bool {
    for (int attempt = 0; attempt < cfg.placement_attempts; ++attempt) {
      s.cx = s.r + u01(rng) * (cfg.width - 2 * s.r);
      s.cy = s.r + u01(rng) * (cfg.height - 2 * s.r);
      bool ok = true;
      for (const auto& o : placed) {
        const double d = std::hypot(s.cx - o.cx, s.cy - o.cy);
        if (d < (s.r + o.r) * (1.0 - cfg.max_overlap)) {
          ok = false;
          break;
        }
      }
      if (ok) {
        placed.push_back(s);
        return true;
      }
    }
    return false;
  };
  auto make_shape = [&](int fam, int col) {
    Shape s{};
    s.family = fam;
    s.r = draw_radius();
    s.aspect = 0.5 + 0.3 * u01(rng);
    s.angle = u01(rng) * M_PI;
    for (int c = 0; c < 3; ++c) {
      s.rgb[c] = std::clamp(kColors[col].rgb[c] + cfg.color_jitter * (2.0 * u01(rng) - 1.0), 0.0, 1.0);
    }
    return s;
  };

  for (int i = 0; i < n_targets; ++i) try_place(make_shape(family, color));
  const std::size_t n_placed = placed.size();

  const int n_distract = std::uniform_int_distribution<int>(cfg.distractor_min, cfg.distractor_max)(rng);
  for (int i = 0; i < n_distract; ++i) {
    // A distractor differs from the targets in colour, and in family when possible.
    int dcol = std::uniform_int_distribution<int>(0, kColorCount - 2)(rng);
    if (dcol >= color) ++dcol;
    int dfam = family;
    if (nf > 1 && u01(rng) < 0.5) {
      dfam = std::uniform_int_distribution<int>(0, nf - 2)(rng);
      if (dfam >= family) ++dfam;
    }
    try_place(make_shape(dfam, dcol));
  }

  // Distractors are painted first so targets stay on top.
  std::vector<PaintedBox> boxes(placed.size());
  for (std::size_t i = n_placed; i < placed.size(); ++i) paint(img, placed[i], cfg.families[placed[i].family]);
  for (std::size_t i = 0; i < n_placed; ++i) boxes[i] = paint(img, placed[i], cfg.families[placed[i].family]);

  AnnotatedImage a;
  a.width = cfg.width;
  a.height = cfg.height;
  a.category = cfg.families[family] + "/" + kColors[color].name;
  for (std::size_t i = 0; i < n_placed; ++i) a.points.push_back({placed[i].cx, placed[i].cy});
  std::vector<std::size_t> order(n_placed);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < std::min(n_placed, kMaxExemplars); ++i) {
    const auto& b = boxes[order[i]];
    a.boxes.push_back({static_cast<double>(b.x0), static_cast<double>(b.y0),
                       static_cast<double>(b.x1), static_cast<double>(b.y1)});
  }
  a.raster = std::move(img);
  return a;
}

}  // namespace

AnnotatedImage synth_scene(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<int> count(config.count_min, config.count_max);
  // Zero-target draws are regenerated; count_max >= 1 makes this terminate.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int n = count(rng);
    if (n == 0) continue;
    AnnotatedImage a = render_scene(config, rng, n);
    if (!a.points.empty()) return a;
  }
  throw std::invalid_argument("synth: could not place any target; radius range too large for the canvas");
}

std::vector<AnnotatedImage> synth_dataset(const SynthConfig& config, int n) {
  if (n <= 0) throw std::invalid_argument("synth: scene count must be positive");
  config.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32)};
  std::mt19937_64 master(seq);
  std::vector<AnnotatedImage> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SynthConfig c = config;
    c.seed = master();
    AnnotatedImage a = synth_scene(c);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%05d.png", i);
    a.image_path = name;
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

namespace {

std::vector<std::string> split_names(std::size_t n) {
  if (n == 2) return {"train", "test"};
  if (n == 3) return {"train", "val", "test"};
  throw std::invalid_argument("make_splits: expected 2 or 3 ratios, got " + std::to_string(n));
}

std::vector<std::size_t> target_counts(std::size_t total, const std::vector<double>& ratios) {
  const double sum = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  std::vector<std::size_t> out(ratios.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < ratios.size(); ++i) {
    out[i] = std::min(total - used, static_cast<std::size_t>(std::llround(total * ratios[i] / sum)));
    used += out[i];
  }
  out.back() = total - used;
  return out;
}

}  // namespace

Splits make_splits(const std::vector<AnnotatedImage>& scenes, const std::vector<double>& ratios,
                   std::uint64_t seed, bool category_disjoint) {
  Splits s;
  s.names = split_names(ratios.size());
  for (double r : ratios)
    if (!(r > 0)) throw std::invalid_argument("make_splits: ratios must be positive");
  s.ids.resize(ratios.size());
  std::mt19937_64 rng(seed);

  if (!category_disjoint) {
    std::vector<std::size_t> order(scenes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const auto counts = target_counts(scenes.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < counts.size(); ++k)
      for (std::size_t i = 0; i < counts[k]; ++i) s.ids[k].push_back(scenes[order[pos++]].image_path);
    return s;
  }

  std::map<std::string, std::vector<std::size_t>> by_cat;
  for (std::size_t i = 0; i < scenes.size(); ++i) by_cat[scenes[i].category].push_back(i);
  if (by_cat.size() < ratios.size()) {
    throw std::invalid_argument("make_splits: category-disjoint mode needs at least " +
                                std::to_string(ratios.size()) + " categories, found " +
                                std::to_string(by_cat.size()));
  }
  std::vector<std::string> cats;
  for (const auto& kv : by_cat) cats.push_back(kv.first);
  std::shuffle(cats.begin(), cats.end(), rng);
  const auto want = target_counts(scenes.size(), ratios);
  std::vector<long> have(ratios.size(), 0);
  std::vector<std::size_t> n_cats(ratios.size(), 0);
  for (std::size_t c = 0; c < cats.size(); ++c) {
    const std::size_t remaining = cats.size() - c;
    const std::size_t empty = static_cast<std::size_t>(std::count(n_cats.begin(), n_cats.end(), 0u));
    std::size_t pick = 0;
    long best = std::numeric_limits<long>::min();
    for (std::size_t k = 0; k < ratios.size(); ++k) {
      if (remaining <= empty && n_cats[k] != 0) continue;
      const long deficit = static_cast<long>(want[k]) - have[k];
      if (deficit > best) {
        best = deficit;
        pick = k;
      }
    }
    for (std::size_t i : by_cat[cats[c]]) s.ids[pick].push_back(scenes[i].image_path);
    have[pick] += static_cast<long>(by_cat[cats[c]].size());
    ++n_cats[pick];
  }
  for (auto& ids : s.ids) std::sort(ids.begin(), ids.end());
  return s;
}

void write_splits(const Splits& s, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < s.names.size(); ++k) {
    std::ofstream os(dir / (s.names[k] + ".txt"), std::ios::binary);
    if (!os) throw DatasetError("cannot write split file in " + dir.string());
    for (const auto& id : s.ids[k]) os << id << '\n';
  }
}

void write_dataset(const fs::path& root, const std::vector<AnnotatedImage>& scenes,
                   const SynthConfig& config, int n) {
  fs::create_directories(root / "images");
  for (const auto& a : scenes) save_png(a.raster, root / "images" / a.image_path);
  write_annotations(root / "annotations.jsonl", scenes);
  ojson m;
  m["generator"] = "synth";
  m["scenes"] = n;
  m["seed"] = config.seed;
  m["config"] = ojson::parse(to_json(config));
  std::set<std::string> cats;
  for (const auto& a : scenes) cats.insert(a.category);
  m["categories"] = std::vector<std::string>(cats.begin(), cats.end());
  std::ofstream os(root / "manifest.json", std::ios::binary);
  os << m.dump(2) << '\n';
}

}  // namespace lcount
