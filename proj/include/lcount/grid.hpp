#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace lcount {

/// Row-major real grid used for count maps, attention maps and hint maps.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}
  Grid(std::size_t r, std::size_t c, std::vector<double> v);

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::size_t size() const { return values.size(); }
  /// Row-major summation.
  double sum() const;

  bool operator==(const Grid&) const = default;
};

// Portable text grid: first line "rows cols", then one line per row of
// space-separated reals printed with 17 significant digits.
void write_grid_text(const Grid& g, std::ostream& os);
Grid read_grid_text(std::istream& is);
void save_grid_text(const Grid& g, const std::filesystem::path& path);
Grid load_grid_text(const std::filesystem::path& path);

}  // namespace lcount
