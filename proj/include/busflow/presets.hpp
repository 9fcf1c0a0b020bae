#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "busflow/solver.hpp"

namespace busflow {

// ---------------------------------------------------------------------------
// Experiment presets. Two model families appear throughout:
//   * two-lane: quadratic diagram, rational-then-linear speed law calibrated
//     to omega(0) = 0.7 and omega(0.6) = 0.4, cap coefficient 0.75;
//   * short-road: same diagram, omega = min{0.3, 1 - rho}, cap coefficient 0.6.
// ---------------------------------------------------------------------------

inline FluxModel two_lane_model() {
  auto [alpha, beta] = calibrate_rational_omega(0.7, 0.4, 0.6);
  return FluxModel::make(FluxCurve::quadratic(1.0, 1.0),
                         OmegaLaw::rational_then_linear(alpha, beta, 0.6), ConstraintLaw(0.75));
}

inline FluxModel short_road_model() {
  return FluxModel::make(FluxCurve::quadratic(1.0, 1.0), OmegaLaw::lwr_min(0.3),
                         ConstraintLaw(0.6));
}

/// Maps a road window onto a vehicle-frame grid whose resolution is
/// road-window-length / cells. pad_left widens the domain so content that
/// falls behind the vehicle stays on the grid (typically Sigma * T).
inline Grid bus_frame_grid(double road_min, double road_max, double y0, int cells,
                           double pad_left = 0.0, double pad_right = 0.0) {
  double dx = (road_max - road_min) / cells;
  int left = static_cast<int>(std::ceil((y0 - road_min + pad_left) / dx - 1e-9));
  int right = static_cast<int>(std::ceil((road_max - y0 + pad_right) / dx - 1e-9));
  return Grid::from_counts(dx, left, right);
}

/// Two-lane validation setup: road window [0, 11], block of density 0.5 on
/// [0.5, 1], vehicle starting at 1.5, weight mu_4, T = 13.
inline RunConfig validation_config(int cells = 1100, int weight_k = 4) {
  RunConfig cfg;
  cfg.model = two_lane_model();
  cfg.T = 13.0;
  cfg.grid = bus_frame_grid(0.0, 11.0, 1.5, cells, cfg.model.sigma * cfg.T);
  cfg.initial = PiecewiseConstantProfile::make({0.5, 1.0}, {0.0, 0.5, 0.0});
  cfg.y0 = 1.5;
  cfg.weight = WeightProfile::mu_k(weight_k);
  cfg.has_weight = true;
  cfg.snapshot_times = {0.0, 3.25, 6.5, 9.75, 13.0};
  return cfg;
}

/// Short-road Riemann setups on [0, 1], T = 0.7245, weight mu_3 by default.
///   case 1: 0.4 | 0.5 at 0.5, vehicle at 0.5
///   case 2: 0.8 | 0.5 at 0.5, vehicle at 0.5
///   case 3: 0.8 | 0.4 at 0.5, vehicle at 0.4
inline RunConfig case_config(int which, int cells = 1000, int weight_k = 3) {
  RunConfig cfg;
  cfg.model = short_road_model();
  cfg.T = 0.7245;
  double y0 = which == 3 ? 0.4 : 0.5;
  cfg.grid = bus_frame_grid(0.0, 1.0, y0, cells);
  switch (which) {
    case 1:
      cfg.initial = PiecewiseConstantProfile::make({0.5}, {0.4, 0.5});
      break;
    case 2:
      cfg.initial = PiecewiseConstantProfile::make({0.5}, {0.8, 0.5});
      break;
    case 3:
      cfg.initial = PiecewiseConstantProfile::make({0.5}, {0.8, 0.4});
      break;
    default:
      throw std::invalid_argument("case_config: case must be 1, 2 or 3");
  }
  cfg.y0 = y0;
  cfg.weight = WeightProfile::mu_k(weight_k);
  cfg.has_weight = true;
  cfg.snapshot_times = {0.0, 0.25 * cfg.T, 0.5 * cfg.T, 0.75 * cfg.T, cfg.T};
  return cfg;
}

/// Jam-release probe: density 1 behind x_b = y0 + jam_gap, vacuum ahead, the
/// vehicle inside the jam. Uses the two-lane speed law (strictly decreasing),
/// so the nonlocal artifact window depends on the weight.
inline RunConfig artifact_config(int weight_k, int cells = 2048, double jam_gap = 1.0 / 64,
                                 double T = 0.3) {
  RunConfig cfg;
  cfg.model = two_lane_model();
  cfg.T = T;
  cfg.y0 = 0.5;
  cfg.grid = bus_frame_grid(0.0, 1.0, cfg.y0, cells);
  cfg.initial = PiecewiseConstantProfile::make({cfg.y0 + jam_gap}, {1.0, 0.0});
  cfg.weight = WeightProfile::mu_k(weight_k);
  cfg.has_weight = true;
  return cfg;
}

inline std::vector<std::string> preset_names() {
  return {"validation", "convergence", "case1",        "case2",
          "case3",      "compare_local", "weight_sweep", "artifact_probe"};
}

}  // namespace busflow
