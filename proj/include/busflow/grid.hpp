#pragma once

#include <cmath>
#include <stdexcept>

namespace busflow {

/// Uniform 1D mesh in the vehicle frame. The interface x = 0 sits exactly on
/// the edge with index `interface_edge`; cell j covers [edge(j), edge(j+1)].
struct Grid {
  double x_min = 0.0;
  double x_max = 0.0;
  int cells = 0;
  double dx = 0.0;
  int interface_edge = 0;

  /// Build from cell counts on each side of the interface.
  static Grid from_counts(double dx_in, int cells_left, int cells_right) {
    if (dx_in <= 0.0) throw std::invalid_argument("grid: dx must be positive");
    if (cells_left < 1 || cells_right < 1)
      throw std::invalid_argument("grid: need at least one cell on each side of the interface");
    Grid g;
    g.cells = cells_left + cells_right;
    if (g.cells < 4) throw std::invalid_argument("grid: need at least 4 cells");
    g.x_min = -(cells_left * dx_in);
    g.x_max = cells_right * dx_in;
    g.dx = (g.x_max - g.x_min) / g.cells;
    g.interface_edge = cells_left;
    return g;
  }

  /// Build from bounds; x = 0 must land on a cell edge (within 1e-9 dx).
  static Grid make(double x_min, double x_max, int cells) {
    if (!(x_max > x_min)) throw std::invalid_argument("grid: x_max must exceed x_min");
    if (cells < 4) throw std::invalid_argument("grid: need at least 4 cells");
    Grid g;
    g.x_min = x_min;
    g.x_max = x_max;
    g.cells = cells;
    g.dx = (x_max - x_min) / cells;
    double m = -x_min / g.dx;
    g.interface_edge = static_cast<int>(std::lround(m));
    if (std::abs(m - g.interface_edge) > 1e-9)
      throw std::invalid_argument("grid: x = 0 does not coincide with a cell edge");
    if (g.interface_edge < 1 || g.interface_edge > cells - 1)
      throw std::invalid_argument("grid: interface must be interior to the domain");
    return g;
  }

  double edge(int e) const { return x_min + e * dx; }
  double center(int j) const { return x_min + (j + 0.5) * dx; }

  bool operator==(const Grid& o) const = default;
};

}  // namespace busflow
