#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "busflow/grid.hpp"
#include "busflow/model.hpp"
#include "busflow/numflux.hpp"

namespace busflow {

enum class CouplingMode : std::uint8_t { Nonlocal, Local, Frozen, Splitting };

/// Everything a single run needs. Initial data are given in road coordinates;
/// the solve happens in the vehicle frame (interface fixed at x = 0).
struct RunConfig {
  FluxModel model;
  Grid grid;
  PiecewiseConstantProfile initial = PiecewiseConstantProfile::constant(0.0);
  double y0 = 0.0;
  WeightProfile weight = WeightProfile::mu_k(3);
  bool has_weight = true;

  CouplingMode mode = CouplingMode::Nonlocal;
  FluxKind bulk_flux = FluxKind::Rusanov;
  FluxKind interface_flux = FluxKind::Godunov;
  RusanovMode rusanov_mode = RusanovMode::Global;
  double cfl_target = 0.5;
  double splitting_delta = 0.0;           // Splitting mode
  std::string frozen_series_file;         // Frozen mode via config files

  double T = 1.0;
  std::vector<double> snapshot_times;
  bool store_states = false;
  bool record_tv = false;
  bool record_mass = false;

  void validate() const {
    if (!(cfl_target > 0.0 && cfl_target <= 1.0))
      throw ConfigError("coupling.cfl: must lie in (0, 1]");
    if (!(T > 0.0)) throw ConfigError("output.T: must be positive");
    for (double t : snapshot_times)
      if (t < 0.0 || t > T + 1e-12) throw ConfigError("output.snapshots: times must lie in [0, T]");
    const double R = model.max_density();
    if (initial.min_value() < 0.0 || initial.max_value() > R)
      throw ConfigError("initial.values: densities must lie in [0, R]");
    if (mode == CouplingMode::Nonlocal || mode == CouplingMode::Splitting) {
      if (!has_weight) throw ConfigError("coupling.weight: required for nonlocal coupling");
    }
    if (has_weight) {
      if (weight.support_lo() < grid.x_min - 1e-12 || weight.support_hi() > grid.x_max + 1e-12)
        throw ConfigError("coupling.weight: support exceeds the grid");
    }
    if (mode == CouplingMode::Splitting && splitting_delta <= 0.0)
      throw ConfigError("coupling.delta: required for splitting mode");
  }

  bool operator==(const RunConfig& o) const = default;
};

struct SimState {
  std::vector<double> rho;
  double t = 0.0;
  double y = 0.0;
  double s = 0.0;
  double q = 0.0;
  double xi = 0.0;
};

/// Time series of one run. Row n (n = 0..steps-1) describes the step starting
/// at t[n]: y[n] is the vehicle position at t[n], and s/xi/q/interface_flux
/// are the values used while marching from t[n] to t[n+1]. A terminal row
/// repeats the last step data at t = T. Snapshots carry their actual times.
struct Trajectory {
  std::vector<double> t, y, s, xi, q, interface_flux;
  std::vector<std::uint8_t> constraint_active;
  std::vector<std::pair<double, std::vector<double>>> snapshots;
  std::vector<double> tv_series;    // per step time, if recorded
  std::vector<double> mass_series;  // per step time, if recorded
  std::vector<std::vector<double>> states;  // full states, if recorded
  SimState final_state;
  double dt = 0.0;
  long steps = 0;
  double boundary_inflow = 0.0;   // integral of the leftmost edge flux
  double boundary_outflow = 0.0;  // integral of the rightmost edge flux
  double initial_mass = 0.0;
  double final_mass = 0.0;

  /// Conservation residual: mass change minus the net boundary influx.
  double mass_drift() const {
    return final_mass - initial_mass - (boundary_inflow - boundary_outflow);
  }
};

/// xi = sum_j rho_j mu_j dx together with the resulting speed and cap.
struct SpeedUpdate {
  double s = 0.0, q = 0.0, xi = 0.0;
};

/// Cell averages of the weight on the grid; exact for piecewise-constant
/// weights whose breakpoints align with cell edges.
inline std::vector<double> discretize_weight(const WeightProfile& mu, const Grid& g) {
  if (mu.support_lo() < g.x_min - 1e-12 || mu.support_hi() > g.x_max + 1e-12)
    throw std::domain_error("discretize_weight: weight support exceeds the grid");
  std::vector<double> avg(g.cells, 0.0);
  for (int j = 0; j < g.cells; ++j) {
    double a = g.edge(j), b = g.edge(j + 1);
    if (b <= mu.support_lo() || a >= mu.support_hi()) continue;
    avg[j] = detail::pcw_integral(mu.edges, mu.values, a, b) / g.dx;
  }
  return avg;
}

inline SpeedUpdate speed_update(std::span<const double> rho, const FluxModel& model,
                                std::span<const double> mu_avg, double dx) {
  double xi = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) xi += rho[j] * mu_avg[j] * dx;
  SpeedUpdate u;
  u.xi = xi;
  u.s = model.omega(xi);
  u.q = model.Q(u.s);
  return u;
}

namespace detail {

struct InterfaceResult {
  double base = 0.0;
  double value = 0.0;
  bool active = false;
};

/// One conservative update with outflow (copy) ghost cells. Fluxes land in
/// edge_flux (size cells+1); the constrained value replaces the interface edge.
inline InterfaceResult march(const FluxModel& m, const Grid& g, FluxKind bulk, FluxKind iface,
                             RusanovMode rus_mode, double s, double q, double dt,
                             const std::vector<double>& rho, std::vector<double>& rho_next,
                             std::vector<double>& edge_flux,
                             std::vector<double>* fvals_scratch = nullptr) {
  const int J = g.cells;
  const double lam = dt / g.dx;
  EdgeFlux Fb = EdgeFlux::make(m, bulk, s, rus_mode);

  if (bulk == FluxKind::Rusanov && fvals_scratch && m.f.kind == CurveKind::Quadratic) {
    // Hot path: cell-wise F values are shared by both adjacent edges.
    std::vector<double>& fv = *fvals_scratch;
    fv.resize(2 * J);
    double* av = fv.data() + J;  // |F'(rho_j)| for the local diffusion constant
    const double sc = m.f.scale, R = m.f.max_density;
    for (int j = 0; j < J; ++j) fv[j] = sc * rho[j] * (R - rho[j]) - s * rho[j];
    if (rus_mode == RusanovMode::Global) {
      const double C = Fb.diff;
      edge_flux[0] = rusanov_combine(fv[0], fv[0], C, rho[0], rho[0]);
      for (int e = 1; e < J; ++e)
        edge_flux[e] = rusanov_combine(fv[e - 1], fv[e], C, rho[e - 1], rho[e]);
      edge_flux[J] = rusanov_combine(fv[J - 1], fv[J - 1], C, rho[J - 1], rho[J - 1]);
    } else {
      for (int j = 0; j < J; ++j) av[j] = std::abs(sc * (R - 2.0 * rho[j]) - s);
      edge_flux[0] = rusanov_combine(fv[0], fv[0], av[0] * (1.0 + 1e-13), rho[0], rho[0]);
      for (int e = 1; e < J; ++e)
        edge_flux[e] = rusanov_combine(fv[e - 1], fv[e],
                                       std::max(av[e - 1], av[e]) * (1.0 + 1e-13), rho[e - 1],
                                       rho[e]);
      edge_flux[J] =
          rusanov_combine(fv[J - 1], fv[J - 1], av[J - 1] * (1.0 + 1e-13), rho[J - 1], rho[J - 1]);
    }
  } else {
    edge_flux[0] = Fb(rho[0], rho[0]);
    for (int e = 1; e < J; ++e) edge_flux[e] = Fb(rho[e - 1], rho[e]);
    edge_flux[J] = Fb(rho[J - 1], rho[J - 1]);
  }

  const int ie = g.interface_edge;
  EdgeFlux Fi = iface == bulk ? Fb : EdgeFlux::make(m, iface, s, rus_mode);
  InterfaceResult res;
  res.base = Fi(rho[ie - 1], rho[ie]);
  res.value = std::min(res.base, q);
  res.active = res.base > q;
  edge_flux[ie] = res.value;

  for (int j = 0; j < J; ++j) rho_next[j] = rho[j] - lam * (edge_flux[j + 1] - edge_flux[j]);
  return res;
}

}  // namespace detail

/// One marching step with prescribed (s, q). Refuses time steps violating the
/// CFL condition. Exposed for property tests; runs use Simulation below.
inline std::vector<double> scheme_step(const FluxModel& m, const Grid& g, FluxKind bulk,
                                       FluxKind iface, const std::vector<double>& rho, double s,
                                       double q, double dt,
                                       RusanovMode rus_mode = RusanovMode::Global) {
  double L = cfl_constant(m, bulk);
  if (dt * L > g.dx * (1.0 + 1e-12))
    throw std::domain_error("scheme_step: CFL violation, dt * L = " + std::to_string(dt * L) +
                            " > dx = " + std::to_string(g.dx));
  if (static_cast<int>(rho.size()) != g.cells)
    throw std::invalid_argument("scheme_step: state size does not match the grid");
  std::vector<double> next(rho.size()), edge_flux(rho.size() + 1);
  detail::march(m, g, bulk, iface, rus_mode, s, q, dt, rho, next, edge_flux);
  return next;
}

// ---------------------------------------------------------------------------
// Resumable solver
// ---------------------------------------------------------------------------

class Simulation {
 public:
  explicit Simulation(const RunConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const Grid& g = cfg.grid;
    rho_.resize(g.cells);
    rho_next_.resize(g.cells);
    edge_flux_.resize(g.cells + 1);
    // initial data: cell averages of the road profile shifted to the bus frame
    const double R = cfg.model.max_density();
    for (int j = 0; j < g.cells; ++j) {
      double v = cfg.initial.average(g.edge(j) + cfg.y0, g.edge(j + 1) + cfg.y0);
      rho_[j] = std::clamp(v, 0.0, R);
    }
    if (cfg.has_weight) {
      mu_avg_ = discretize_weight(cfg.weight, g);
      w_lo_ = 0;
      while (w_lo_ < g.cells && mu_avg_[w_lo_] == 0.0) ++w_lo_;
      w_hi_ = g.cells;
      while (w_hi_ > w_lo_ && mu_avg_[w_hi_ - 1] == 0.0) --w_hi_;
    }
    L_ = cfl_constant(cfg.model, cfg.bulk_flux);
    dt_ = cfg.cfl_target * g.dx / L_;
    full_steps_ = static_cast<long>(std::floor(cfg.T / dt_));
    tail_ = cfg.T - full_steps_ * dt_;
    clipped_ = tail_ > dt_ * 1e-12;
    total_steps_ = full_steps_ + (clipped_ ? 1 : 0);
    y_ = cfg.y0;
    if (cfg.mode == CouplingMode::Splitting) {
      if (cfg.splitting_delta < dt_ * (1.0 - 1e-12))
        throw ConfigError("coupling.delta: splitting window must be at least one time step");
      window_ = static_cast<long>(std::floor(cfg.splitting_delta / dt_ * (1.0 + 1e-12)));
      if (window_ < 1) window_ = 1;
    }
  }

  void set_frozen_series(std::vector<double> s_series, std::vector<double> q_series) {
    if (static_cast<long>(s_series.size()) < total_steps_ ||
        static_cast<long>(q_series.size()) < total_steps_)
      throw ConfigError("frozen series shorter than the step count (" +
                        std::to_string(total_steps_) + " steps needed)");
    frozen_s_ = std::move(s_series);
    frozen_q_ = std::move(q_series);
  }

  long total_steps() const { return total_steps_; }
  long step() const { return step_; }
  bool done() const { return step_ >= total_steps_; }
  double dt() const { return dt_; }
  double dt_of_step(long n) const { return (clipped_ && n == total_steps_ - 1) ? tail_ : dt_; }
  double t() const { return t_; }
  double y() const { return y_; }
  double s() const { return s_; }
  double q() const { return q_; }
  double xi() const { return xi_; }
  long splitting_window() const { return window_; }
  const std::vector<double>& rho() const { return rho_; }
  const Grid& grid() const { return cfg_.grid; }
  const RunConfig& config() const { return cfg_; }
  double interface_flux_value() const { return iface_.value; }
  bool constraint_active() const { return iface_.active; }
  double boundary_inflow() const { return bin_; }
  double boundary_outflow() const { return bout_; }

  double current_xi() const {
    double xi = 0.0;
    for (int j = w_lo_; j < w_hi_; ++j) xi += rho_[j] * mu_avg_[j] * cfg_.grid.dx;
    return xi;
  }

  void advance() {
    if (done()) throw std::logic_error("Simulation::advance: run already finished");
    const long n = step_;
    const double dtn = dt_of_step(n);

    switch (cfg_.mode) {
      case CouplingMode::Nonlocal:
        xi_ = current_xi();
        s_ = cfg_.model.omega(xi_);
        q_ = cfg_.model.Q(s_);
        break;
      case CouplingMode::Local:
        xi_ = rho_[cfg_.grid.interface_edge];
        s_ = cfg_.model.omega(xi_);
        q_ = cfg_.model.Q(s_);
        break;
      case CouplingMode::Frozen:
        if (frozen_s_.empty()) throw std::logic_error("frozen run without a prescribed series");
        s_ = frozen_s_[n];
        q_ = frozen_q_[n];
        xi_ = cfg_.has_weight ? current_xi() : std::numeric_limits<double>::quiet_NaN();
        break;
      case CouplingMode::Splitting:
        if (n % window_ == 0) {
          xi_ = current_xi();
          s_ = cfg_.model.omega(xi_);
          q_ = cfg_.model.Q(s_);
        } else {
          xi_ = current_xi();  // recorded for the series; speed stays frozen
        }
        break;
    }

    iface_ = detail::march(cfg_.model, cfg_.grid, cfg_.bulk_flux, cfg_.interface_flux,
                           cfg_.rusanov_mode, s_, q_, dtn, rho_, rho_next_, edge_flux_, &fvals_);
    bin_ += dtn * edge_flux_.front();
    bout_ += dtn * edge_flux_.back();
    rho_.swap(rho_next_);

    const double R = cfg_.model.max_density();
    for (int j = 0; j < cfg_.grid.cells; ++j) {
      if (!(rho_[j] >= 0.0 && rho_[j] <= R))
        throw std::logic_error("L-infinity stability violated at step " + std::to_string(n + 1) +
                               ", cell " + std::to_string(j) + ": rho = " + std::to_string(rho_[j]));
    }

    y_ += dtn * s_;
    ++step_;
    t_ = (clipped_ && step_ == total_steps_) ? cfg_.T : step_ * dt_;
  }

 private:
  RunConfig cfg_;
  std::vector<double> rho_, rho_next_, edge_flux_, fvals_;
  std::vector<double> mu_avg_;
  int w_lo_ = 0, w_hi_ = 0;
  std::vector<double> frozen_s_, frozen_q_;
  double L_ = 0.0, dt_ = 0.0, tail_ = 0.0;
  bool clipped_ = false;
  long full_steps_ = 0, total_steps_ = 0, step_ = 0, window_ = 1;
  double t_ = 0.0, y_ = 0.0, s_ = 0.0, q_ = 0.0, xi_ = 0.0;
  double bin_ = 0.0, bout_ = 0.0;
  detail::InterfaceResult iface_;
};

namespace detail {

inline double profile_tv(const std::vector<double>& rho) {
  double tv = 0.0;
  for (std::size_t j = 1; j < rho.size(); ++j) tv += std::abs(rho[j] - rho[j - 1]);
  return tv;
}

inline double profile_mass(const std::vector<double>& rho, double dx) {
  double m = 0.0;
  for (double r : rho) m += r;
  return m * dx;
}

/// Appends the row for the step that just ran: position at the step start,
/// speed data used during the step.
inline void push_step_row(Trajectory& tr, double t0, double y0, const Simulation& sim) {
  tr.t.push_back(t0);
  tr.y.push_back(y0);
  tr.s.push_back(sim.s());
  tr.xi.push_back(sim.xi());
  tr.q.push_back(sim.q());
  tr.interface_flux.push_back(sim.interface_flux_value());
  tr.constraint_active.push_back(sim.constraint_active() ? 1 : 0);
}

/// Terminal row at t = T, repeating the last step's speed data.
inline void push_terminal_row(Trajectory& tr, const Simulation& sim) {
  tr.t.push_back(sim.t());
  tr.y.push_back(sim.y());
  double xi_end = sim.config().has_weight ? sim.current_xi() : sim.xi();
  tr.s.push_back(sim.s());
  tr.xi.push_back(xi_end);
  tr.q.push_back(sim.q());
  tr.interface_flux.push_back(sim.interface_flux_value());
  tr.constraint_active.push_back(sim.constraint_active() ? 1 : 0);
  tr.final_state = SimState{sim.rho(), sim.t(), sim.y(), sim.s(), sim.q(), xi_end};
  tr.boundary_inflow = sim.boundary_inflow();
  tr.boundary_outflow = sim.boundary_outflow();
  tr.dt = sim.dt();
  tr.steps = sim.total_steps();
  tr.final_mass = profile_mass(sim.rho(), sim.grid().dx);
}

}  // namespace detail

/// Drives a simulation to t = T, recording the trajectory per the RunConfig.
inline Trajectory run_simulation(Simulation& sim) {
  const RunConfig& cfg = sim.config();
  if (cfg.store_states) {
    double bytes = 8.0 * cfg.grid.cells * (sim.total_steps() + 1.0);
    if (bytes > 4e9)
      throw ConfigError("output.store_states: full-state storage would need " +
                        std::to_string(bytes / 1e9) + " GB; use a coarser run");
  }
  Trajectory tr;
  tr.dt = sim.dt();
  tr.steps = sim.total_steps();
  const long n_rows = sim.total_steps() + 1;
  tr.t.reserve(n_rows);
  tr.y.reserve(n_rows);
  tr.s.reserve(n_rows);
  tr.xi.reserve(n_rows);
  tr.q.reserve(n_rows);
  tr.interface_flux.reserve(n_rows);
  tr.constraint_active.reserve(n_rows);

  std::vector<double> snap_req = cfg.snapshot_times;
  std::sort(snap_req.begin(), snap_req.end());
  std::size_t snap_next = 0;
  auto take_snapshots = [&](double now) {
    while (snap_next < snap_req.size() && now >= snap_req[snap_next] - 1e-12 * std::max(1.0, cfg.T)) {
      tr.snapshots.emplace_back(now, sim.rho());
      ++snap_next;
    }
  };

  tr.initial_mass = detail::profile_mass(sim.rho(), cfg.grid.dx);
  if (cfg.record_tv) tr.tv_series.push_back(detail::profile_tv(sim.rho()));
  if (cfg.record_mass) tr.mass_series.push_back(tr.initial_mass);
  if (cfg.store_states) tr.states.push_back(sim.rho());
  take_snapshots(0.0);

  while (!sim.done()) {
    double t0 = sim.t(), y0 = sim.y();
    sim.advance();
    detail::push_step_row(tr, t0, y0, sim);
    if (cfg.record_tv) tr.tv_series.push_back(detail::profile_tv(sim.rho()));
    if (cfg.record_mass) tr.mass_series.push_back(detail::profile_mass(sim.rho(), cfg.grid.dx));
    if (cfg.store_states) tr.states.push_back(sim.rho());
    take_snapshots(sim.t());
  }

  detail::push_terminal_row(tr, sim);
  return tr;
}

/// The coupled scheme: speed from the weighted density average, then marching.
inline Trajectory run_coupled(const RunConfig& cfg) {
  if (cfg.mode != CouplingMode::Nonlocal)
    throw std::invalid_argument("run_coupled: config mode must be nonlocal");
  Simulation sim(cfg);
  return run_simulation(sim);
}

/// Local-coupling variant: speed from the first cell right of the interface.
inline Trajectory run_local(RunConfig cfg) {
  cfg.mode = CouplingMode::Local;
  Simulation sim(cfg);
  return run_simulation(sim);
}

/// Frozen-speed solver with a prescribed per-step (s, q) series.
inline Trajectory run_frozen(RunConfig cfg, std::vector<double> s_series,
                             std::vector<double> q_series) {
  cfg.mode = CouplingMode::Frozen;
  Simulation sim(cfg);
  sim.set_frozen_series(std::move(s_series), std::move(q_series));
  return run_simulation(sim);
}

/// Time-splitting driver: the speed is refreshed from the lagged density only
/// at window boundaries (delta rounded down to a whole number of steps).
inline Trajectory run_splitting(RunConfig cfg, double delta) {
  cfg.mode = CouplingMode::Splitting;
  cfg.splitting_delta = delta;
  Simulation sim(cfg);
  return run_simulation(sim);
}

}  // namespace busflow
