#pragma once

// Annotated images, the line-delimited annotation format, preprocessing
// (shortest-side resize, training crops), the synthetic scene generator and
// dataset splitting.
//
// Pixel convention: pixel (i, j) covers [i, i+1) x [j, j+1); dot coordinates
// are continuous and must satisfy 0 <= x < width, 0 <= y < height.

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcount/geometry.hpp"
#include "lcount/image.hpp"

namespace lcount {

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

struct AnnotatedImage {
  std::string image_path;  // identifier, relative to the dataset's images/ directory
  int width = 0;
  int height = 0;
  std::vector<Point> points;
  std::vector<ExemplarBox> boxes;
  std::string category;
  Image raster;  // may be empty when only the annotation is needed
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws DatasetError naming the image and the violated invariant.
void validate(const AnnotatedImage& a);

// One JSON object per line:
//   {"image": str, "points": [[x,y],...], "boxes": [[x1,y1,x2,y2],...], "category": str}
std::string to_record(const AnnotatedImage& a);
/// Parses a record; width/height stay 0 until the image is inspected.
AnnotatedImage parse_record(const std::string& line);
void write_annotations(const std::filesystem::path& path, const std::vector<AnnotatedImage>& items);
std::vector<AnnotatedImage> read_annotations(const std::filesystem::path& path);

/// Reads root/annotations.jsonl and returns, in split-file order, the records
/// listed in `split_file` with their rasters loaded from root/images/.
std::vector<AnnotatedImage> load_dataset(const std::filesystem::path& root,
                                         const std::filesystem::path& split_file,
                                         bool load_rasters = true);

/// Isotropic resize so that min(width, height) == target; annotations follow.
AnnotatedImage resize_shortest_side(const AnnotatedImage& a, int target = 384);

/// Uniform random size x size crop. Points are filtered and translated; boxes
/// are translated and may leave the crop, since exemplars are extracted from
/// the uncropped image.
AnnotatedImage crop_training_patch(const AnnotatedImage& a, int size, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthConfig {
  int width = 128;
  int height = 128;
  std::vector<std::string> families{"disc", "ellipse", "cluster"};
  int count_min = 1;
  int count_max = 30;
  /// Each scene draws a base radius log-uniformly in [radius_min, radius_max];
  /// targets jitter around it by +-radius_jitter (relative) and stay in range.
  double radius_min = 4.0;
  double radius_max = 8.0;
  double radius_jitter = 0.15;
  int distractor_min = 0;
  int distractor_max = 6;
  double color_jitter = 0.08;
  /// Largest allowed overlap between two shapes, as a fraction of r1 + r2.
  double max_overlap = 0.1;
  int placement_attempts = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const std::string& text);

/// Renders one scene. Points are the exact target centres; boxes are tight
/// boxes of up to three randomly chosen targets. Deterministic per seed.
AnnotatedImage synth_scene(const SynthConfig& config);

/// Generates n scenes with per-scene seeds derived from config.seed.
std::vector<AnnotatedImage> synth_dataset(const SynthConfig& config, int n);

// ---------------------------------------------------------------------------
// Splits

struct Splits {
  std::vector<std::string> names;            // "train", ["val",] "test"
  std::vector<std::vector<std::string>> ids;  // image identifiers per split
};

/// Two ratios give train/test, three give train/val/test. In category-disjoint
/// mode whole categories are assigned to splits.
Splits make_splits(const std::vector<AnnotatedImage>& scenes, const std::vector<double>& ratios,
                   std::uint64_t seed, bool category_disjoint);
void write_splits(const Splits& s, const std::filesystem::path& dir);
std::vector<std::string> read_split_file(const std::filesystem::path& path);

/// Writes images/<id>, annotations.jsonl and manifest.json under `root`.
void write_dataset(const std::filesystem::path& root, const std::vector<AnnotatedImage>& scenes,
                   const SynthConfig& config, int n);

}  // namespace lcount
