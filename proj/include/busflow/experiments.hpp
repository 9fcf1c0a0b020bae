#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "busflow/diagnostics.hpp"
#include "busflow/presets.hpp"
#include "busflow/solver.hpp"

namespace busflow {

/// Config with the mesh halved (dx/2, double the cells on each side).
/// Left/right cell counts scale exactly, so the grids nest 2:1.
inline RunConfig refine(const RunConfig& cfg) {
  RunConfig fine = cfg;
  int left = cfg.grid.interface_edge;
  int right = cfg.grid.cells - left;
  fine.grid = Grid::from_counts(cfg.grid.dx / 2.0, 2 * left, 2 * right);
  return fine;
}

/// Streamed version of refinement_errors: the coarse run and its half-mesh
/// refinement march in lockstep (dt halves exactly with dx), so no space-time
/// storage is needed. Left-endpoint rectangles on the coarse clock.
inline PairErrors paired_refinement_errors(const RunConfig& coarse_cfg) {
  RunConfig fine_cfg = refine(coarse_cfg);
  Simulation coarse(coarse_cfg), fine(fine_cfg);
  PairErrors e;
  const double dxf = fine_cfg.grid.dx;
  while (!coarse.done()) {
    double w = coarse.dt_of_step(coarse.step());
    e.e_rho += w * detail::l1_prolonged(coarse.rho(), fine.rho(), dxf);
    e.e_y = std::max(e.e_y, std::abs(coarse.y() - fine.y()));
    coarse.advance();
    while (fine.t() < coarse.t() && !fine.done()) fine.advance();
  }
  e.e_y = std::max(e.e_y, std::abs(coarse.y() - fine.y()));
  return e;
}

/// Streamed same-mesh comparison of the nonlocal run against its local twin
/// (speed from the first cell right of the interface). Optionally records the
/// two trajectories (series only) along the way.
inline PairErrors paired_model_gap(const RunConfig& nonlocal_cfg, Trajectory* nl_out = nullptr,
                                   Trajectory* loc_out = nullptr) {
  if (nonlocal_cfg.mode != CouplingMode::Nonlocal)
    throw std::invalid_argument("paired_model_gap: config mode must be nonlocal");
  RunConfig local_cfg = nonlocal_cfg;
  local_cfg.mode = CouplingMode::Local;
  Simulation a(nonlocal_cfg), b(local_cfg);
  PairErrors e;
  const double dx = nonlocal_cfg.grid.dx;
  if (nl_out) nl_out->initial_mass = detail::profile_mass(a.rho(), dx);
  if (loc_out) loc_out->initial_mass = detail::profile_mass(b.rho(), dx);
  while (!a.done()) {
    double w = a.dt_of_step(a.step());
    e.e_rho += w * detail::l1_same(a.rho(), b.rho(), dx);
    e.e_y = std::max(e.e_y, std::abs(a.y() - b.y()));
    double t0 = a.t(), ya = a.y(), yb = b.y();
    a.advance();
    b.advance();
    if (nl_out) detail::push_step_row(*nl_out, t0, ya, a);
    if (loc_out) detail::push_step_row(*loc_out, t0, yb, b);
  }
  e.e_y = std::max(e.e_y, std::abs(a.y() - b.y()));
  if (nl_out) detail::push_terminal_row(*nl_out, a);
  if (loc_out) detail::push_terminal_row(*loc_out, b);
  return e;
}

// ---------------------------------------------------------------------------
// Study drivers
// ---------------------------------------------------------------------------

struct ConvergenceResult {
  RefinementStudy study;
  double order_rho = 0.0, order_y = 0.0;
};

/// Doubling ladder for the validation setup. Each level is paired with its own
/// half-mesh refinement, matching the tabulated errors' definition.
inline ConvergenceResult run_convergence(int base_cells = 160, int levels = 7, int weight_k = 4) {
  ConvergenceResult res;
  for (int l = 0; l < levels; ++l) {
    int cells = base_cells << l;
    RunConfig cfg = validation_config(cells, weight_k);
    PairErrors e = paired_refinement_errors(cfg);
    res.study.cells.push_back(cells);
    res.study.e_rho.push_back(e.e_rho);
    res.study.e_y.push_back(e.e_y);
  }
  auto [orho, oy] = convergence_order(res.study);
  res.order_rho = orho;
  res.order_y = oy;
  return res;
}

struct WeightSweepRow {
  int k = 0;
  double e1 = 0.0, einf = 0.0;
};

/// Local-vs-nonlocal gap for a family of weights mu_k at fixed resolution.
inline std::vector<WeightSweepRow> run_weight_sweep(const std::vector<int>& ks, int which_case,
                                                    int cells) {
  std::vector<WeightSweepRow> rows;
  for (int k : ks) {
    PairErrors e = paired_model_gap(case_config(which_case, cells, k));
    rows.push_back({k, e.e_rho, e.e_y});
  }
  return rows;
}

struct SplittingStudy {
  std::vector<double> delta;     // window lengths T / 2^m
  std::vector<double> l1_final;  // L1 distance to the coupled run at t = T
  bool bitwise_at_dt = false;    // delta = dt reproduces the coupled run exactly
};

/// Self-convergence of the time-splitting construction toward the coupled
/// scheme as the window length shrinks.
inline SplittingStudy run_splitting_study(const RunConfig& cfg, int m_max = 6) {
  if (cfg.mode != CouplingMode::Nonlocal)
    throw std::invalid_argument("run_splitting_study: config mode must be nonlocal");
  Trajectory coupled = run_coupled(cfg);
  SplittingStudy st;
  for (int m = 1; m <= m_max; ++m) {
    double delta = cfg.T / std::pow(2.0, m);
    Trajectory split = run_splitting(cfg, delta);
    st.delta.push_back(delta);
    st.l1_final.push_back(
        detail::l1_same(split.final_state.rho, coupled.final_state.rho, cfg.grid.dx));
  }
  Trajectory at_dt = run_splitting(cfg, coupled.dt);
  st.bitwise_at_dt = at_dt.final_state.rho == coupled.final_state.rho &&
                     at_dt.s == coupled.s && at_dt.y == coupled.y;
  return st;
}

/// Car speed v = f(rho)/rho (the free-flow speed as rho -> 0).
inline double car_speed(const FluxModel& m, double rho) {
  if (m.f.kind == CurveKind::Quadratic) return m.f.scale * (m.f.max_density - rho);
  return rho > 1e-12 ? m.f(rho) / rho : m.f.derivative(0.0);
}

struct ArtifactProbeRow {
  int k = 0;
  double duration = 0.0;  // first step time with s <= car speed just ahead
};

/// Measures, per weight, how long the vehicle keeps outpacing the car
/// immediately ahead after a jam-release start. Runs continue to T so full
/// trajectories can be captured alongside the durations.
inline std::vector<ArtifactProbeRow> run_artifact_probe(const std::vector<int>& ks,
                                                        int cells = 2048,
                                                        double jam_gap = 1.0 / 64, double T = 0.3,
                                                        std::vector<Trajectory>* trajectories = nullptr) {
  std::vector<ArtifactProbeRow> rows;
  for (int k : ks) {
    RunConfig cfg = artifact_config(k, cells, jam_gap, T);
    Simulation sim(cfg);
    Trajectory tr;
    tr.initial_mass = detail::profile_mass(sim.rho(), cfg.grid.dx);
    double duration = T;
    bool crossed = false;
    while (!sim.done()) {
      double ahead = sim.rho()[cfg.grid.interface_edge];
      double t0 = sim.t(), y0 = sim.y();
      sim.advance();
      if (!crossed && sim.s() <= car_speed(cfg.model, ahead) + 1e-14) {
        duration = t0;
        crossed = true;
      }
      if (trajectories) detail::push_step_row(tr, t0, y0, sim);
    }
    if (trajectories) {
      detail::push_terminal_row(tr, sim);
      trajectories->push_back(std::move(tr));
    }
    rows.push_back({k, duration});
  }
  return rows;
}

}  // namespace busflow
