#include "lcount/grid.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lcount {

Grid::Grid(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) {
    throw std::invalid_argument("Grid: " + std::to_string(values.size()) +
                                " values for a " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " grid");
  }
}

double Grid::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

void write_grid_text(const Grid& g, std::ostream& os) {
  os << g.rows << ' ' << g.cols << '\n';
  char buf[40];
  for (std::size_t r = 0; r < g.rows; ++r) {
    for (std::size_t c = 0; c < g.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", g.at(r, c));
      os << (c ? " " : "") << buf;
    }
    os << '\n';
  }
}

Grid read_grid_text(std::istream& is) {
  std::size_t rows = 0, cols = 0;
  if (!(is >> rows >> cols)) throw std::runtime_error("grid text: missing 'rows cols' header");
  Grid g(rows, cols);
  for (auto& v : g.values) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("grid text: truncated body");
    v = std::stod(tok);
  }
  return g;
}

void save_grid_text(const Grid& g, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_grid_text(g, os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Grid load_grid_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_grid_text(is);
}

}  // namespace lcount
