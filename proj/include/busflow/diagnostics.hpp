#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "busflow/solver.hpp"

namespace busflow {

enum class CheckStatus : std::uint8_t { Pass, Fail, Inapplicable };

struct CheckLocation {
  long step = -1;
  long cell = -1;
  double k = std::numeric_limits<double>::quiet_NaN();
};

struct DiagnosticsReport {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  double worst_margin = -std::numeric_limits<double>::infinity();
  CheckLocation where;
  std::string note;

  bool passed() const { return status != CheckStatus::Fail; }
};

/// Kruzhkov entropy flux in the vehicle frame:
/// sign(a - k)(f(a) - f(k)) - s |a - k|.
inline double kruzhkov_flux(const FluxModel& m, double s, double a, double k) {
  m.flux(s, a);
  m.flux(s, k);
  double sgn = a > k ? 1.0 : (a < k ? -1.0 : 0.0);
  return sgn * (m.f(a) - m.f(k)) - s * std::abs(a - k);
}

inline double total_variation(std::span<const double> profile) {
  double tv = 0.0;
  for (std::size_t j = 1; j < profile.size(); ++j) tv += std::abs(profile[j] - profile[j - 1]);
  return tv;
}

// ---------------------------------------------------------------------------
// Discrete entropy inequalities
// ---------------------------------------------------------------------------

/// Checks, for every step, cell and sampled entropy level k, that
///   (|rho^{n+1} - k| - |rho^n - k|) dx + (Phi_{j+1} - Phi_j) dt
///     <= R_s(k, q) dt [j adjacent to the interface]
///        + (Phi_0 - Phi_int) dt (on the left) - (...) (on the right),
/// where Phi are the numerical entropy fluxes built from the scheme's own
/// two-point fluxes applied to (rho v k, rho ^ k) pairs. The sample contains
/// `k_samples` uniform levels plus the per-step constraint roots.
inline DiagnosticsReport discrete_entropy_check(const RunConfig& cfg, const Trajectory& tr,
                                                int k_samples = 21) {
  if (tr.states.empty())
    throw std::invalid_argument("discrete_entropy_check: run must store full states");
  DiagnosticsReport rep;
  rep.name = "discrete_entropy";
  const Grid& g = cfg.grid;
  const FluxModel& m = cfg.model;
  const int J = g.cells, ie = g.interface_edge;
  const double R = m.max_density();
  const long N = static_cast<long>(tr.states.size()) - 1;

  std::vector<double> ks(k_samples);
  for (int i = 0; i < k_samples; ++i) ks[i] = R * static_cast<double>(i) / (k_samples - 1);

  std::vector<double> phi(J + 1);
  for (long n = 0; n < N; ++n) {
    const std::vector<double>& u0 = tr.states[n];
    const std::vector<double>& u1 = tr.states[n + 1];
    const double s = tr.s[n], q = tr.q[n];
    const double dtn = tr.t[n + 1] - tr.t[n];
    detail::EdgeFlux Fb = detail::EdgeFlux::make(m, cfg.bulk_flux, s, cfg.rusanov_mode);
    detail::EdgeFlux Fi = detail::EdgeFlux::make(m, cfg.interface_flux, s, cfg.rusanov_mode);

    std::vector<double> klist = ks;
    double fmax = m.max_flux(s);
    if (q <= fmax) {
      auto roots = m.constraint_roots(s, q);
      klist.push_back(roots.first);
      klist.push_back(roots.second);
    }

    for (double k : klist) {
      auto up = [&](double a) { return std::max(a, k); };
      auto dn = [&](double a) { return std::min(a, k); };
      auto ghostL = u0.front();
      auto ghostR = u0.back();
      // entropy fluxes at edges, unconstrained (interface edge uses its base kind)
      for (int e = 0; e <= J; ++e) {
        double a = e == 0 ? ghostL : u0[e - 1];
        double b = e == J ? ghostR : u0[e];
        const detail::EdgeFlux& F = e == ie ? Fi : Fb;
        phi[e] = F(up(a), up(b)) - F(dn(a), dn(b));
      }
      double phi0 = phi[ie];
      double phi_int = std::min(Fi(up(u0[ie - 1]), up(u0[ie])), q) -
                       std::min(Fi(dn(u0[ie - 1]), dn(u0[ie])), q);
      double Fk = m.flux(s, k);
      double Rs = Fk - std::min(Fk, q);

      for (int c = 0; c < J; ++c) {
        double lhs = (std::abs(u1[c] - k) - std::abs(u0[c] - k)) * g.dx +
                     (phi[c + 1] - phi[c]) * dtn;
        double rhs = 0.0;
        if (c == ie - 1) rhs = Rs * dtn + (phi0 - phi_int) * dtn;
        if (c == ie) rhs = Rs * dtn - (phi0 - phi_int) * dtn;
        double margin = lhs - rhs;
        if (margin > rep.worst_margin) {
          rep.worst_margin = margin;
          rep.where = {n, c, k};
        }
      }
    }
  }
  rep.status = rep.worst_margin <= 1e-12 ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

// ---------------------------------------------------------------------------
// BV bound certification
// ---------------------------------------------------------------------------

/// C_eps = 4 (1 + ||d_s F||_inf) / C_0 where C_0 is the smallest |d_rho F|
/// outside the near-critical band cut at level max F - eps. C_0 is sampled
/// over s in [0, Sigma], always including the exact band endpoints, so the
/// quadratic closed form 2 sqrt(scale * eps) is recovered.
inline double bv_bound_constant(const FluxModel& m, double eps, int s_samples = 201,
                                int rho_samples = 401) {
  detail::require_domain(eps > 0.0, "bv_bound_constant: eps must be positive");
  GapResult gap = m.constraint_gap();
  if (eps > gap.value * (1.0 + 1e-12))
    throw std::domain_error("bv_bound_constant: eps exceeds the constraint gap");
  const double R = m.max_density();

  // the union over s of the excluded bands ]rho_check, rho_hat[ at level q_eps(s)
  double band_lo = R, band_hi = 0.0;
  std::vector<std::pair<double, double>> roots(s_samples);
  for (int i = 0; i < s_samples; ++i) {
    double s = m.sigma * static_cast<double>(i) / (s_samples - 1);
    roots[i] = m.constraint_roots(s, m.max_flux(s) - eps);
    band_lo = std::min(band_lo, roots[i].first);
    band_hi = std::max(band_hi, roots[i].second);
  }
  double c0 = std::numeric_limits<double>::infinity();
  auto deriv = [&](double s, double r) { return std::abs(m.f.derivative(r) - s); };
  for (int i = 0; i < s_samples; ++i) {
    double s = m.sigma * static_cast<double>(i) / (s_samples - 1);
    c0 = std::min(c0, deriv(s, roots[i].first));
    c0 = std::min(c0, deriv(s, roots[i].second));
    for (int j = 0; j < rho_samples; ++j) {
      double r = R * static_cast<double>(j) / (rho_samples - 1);
      if (r > band_lo && r < band_hi) continue;
      c0 = std::min(c0, deriv(s, r));
    }
  }
  double ds_f = R;  // |d_s F| = rho <= R
  return 4.0 * (1.0 + ds_f) / c0;
}

/// TV(rho(t^{n+1})) <= TV(rho_0) + 4R + C_eps sum_{k<=n} (|dq| + |ds|), each step.
inline DiagnosticsReport bv_bound_check(const RunConfig& cfg, const Trajectory& tr, double c_eps) {
  DiagnosticsReport rep;
  rep.name = "bv_bound";
  if (tr.tv_series.empty())
    throw std::invalid_argument("bv_bound_check: run must record the TV series");
  const double base = tr.tv_series.front() + 4.0 * cfg.model.max_density();
  double jumps = 0.0;
  for (long n = 0; n + 1 < static_cast<long>(tr.tv_series.size()); ++n) {
    if (n > 0) jumps += std::abs(tr.q[n] - tr.q[n - 1]) + std::abs(tr.s[n] - tr.s[n - 1]);
    double margin = tr.tv_series[n + 1] - (base + c_eps * jumps);
    if (margin > rep.worst_margin) {
      rep.worst_margin = margin;
      rep.where = {n, -1, std::numeric_limits<double>::quiet_NaN()};
    }
  }
  rep.status = rep.worst_margin <= 1e-12 ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

// ---------------------------------------------------------------------------
// One-sided Lipschitz decay
// ---------------------------------------------------------------------------

/// Decay of positive density jumps D_j = max(rho_left - rho_right, 0) at edges
/// away from the interface, for Engquist-Osher or Godunov bulk flux and a
/// uniformly concave fundamental diagram (f'' <= -alpha):
///   D^{n+1} <= M - a M^2,  M = max of the three neighbors, a = lambda alpha / 4,
///   D^{n+1}_j <= 1 / (min(|j| - 1, n+1) a).
/// The final clipped step only enters the first bound (with its own a).
inline DiagnosticsReport oslc_check(const RunConfig& cfg, const Trajectory& tr, double alpha) {
  DiagnosticsReport rep;
  rep.name = "oslc_decay";
  if (cfg.bulk_flux == FluxKind::Rusanov) {
    rep.status = CheckStatus::Inapplicable;
    rep.note = "bulk flux must be Engquist-Osher or Godunov";
    return rep;
  }
  if (tr.states.empty()) throw std::invalid_argument("oslc_check: run must store full states");
  const Grid& g = cfg.grid;
  const int J = g.cells, ie = g.interface_edge;
  const long N = static_cast<long>(tr.states.size()) - 1;
  const double a_nominal = (tr.dt / g.dx) * alpha / 4.0;

  auto D = [&](const std::vector<double>& u, int e) {
    return std::max(u[e - 1] - u[e], 0.0);
  };

  for (long n = 0; n < N; ++n) {
    const std::vector<double>& u0 = tr.states[n];
    const std::vector<double>& u1 = tr.states[n + 1];
    const double dtn = tr.t[n + 1] - tr.t[n];
    const double a_step = (dtn / g.dx) * alpha / 4.0;
    const bool clipped = dtn < tr.dt * (1.0 - 1e-9);
    for (int e = 2; e <= J - 2; ++e) {
      int je = e - ie;
      if (je >= -1 && je <= 1) continue;
      double M = std::max({D(u0, e - 1), D(u0, e), D(u0, e + 1)});
      double b1 = M - a_step * M * M;
      double margin = D(u1, e) - b1;
      if (!clipped) {
        long depth = std::min<long>(std::abs(je) - 1, n + 1);
        double b2 = 1.0 / (depth * a_nominal);
        margin = std::max(margin, D(u1, e) - b2);
      }
      if (margin > rep.worst_margin) {
        rep.worst_margin = margin;
        rep.where = {n, e, std::numeric_limits<double>::quiet_NaN()};
      }
    }
  }
  rep.status = rep.worst_margin <= 1e-12 ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

// ---------------------------------------------------------------------------
// Regularity of the weighted average
// ---------------------------------------------------------------------------

/// |xi(t) - xi(tau)| <= R L K (|t - tau| + 2 dt) over subsampled step pairs,
/// K >= max(mass, TV) of the weight (mu_k: K = 2^{k+1}).
inline DiagnosticsReport xi_regularity_check(const RunConfig& cfg, const Trajectory& tr,
                                             double K = 0.0, std::size_t max_pairs = 10000) {
  DiagnosticsReport rep;
  rep.name = "xi_regularity";
  if (K <= 0.0) K = std::max(cfg.weight.mass(), cfg.weight.total_variation());
  const double R = cfg.model.max_density();
  const double L = cfl_constant(cfg.model, cfg.bulk_flux);
  const std::size_t n = tr.t.size();
  std::size_t stride = std::max<std::size_t>(1, n * n / (2 * max_pairs));
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; j += stride) {
      double bound = R * L * K * (std::abs(tr.t[j] - tr.t[i]) + 2.0 * tr.dt);
      double margin = std::abs(tr.xi[j] - tr.xi[i]) - bound;
      if (margin > rep.worst_margin) {
        rep.worst_margin = margin;
        rep.where = {static_cast<long>(i), static_cast<long>(j),
                     std::numeric_limits<double>::quiet_NaN()};
      }
      ++count;
    }
  }
  rep.note = "pairs checked: " + std::to_string(count);
  rep.status = rep.worst_margin <= 1e-12 ? CheckStatus::Pass : CheckStatus::Fail;
  return rep;
}

// ---------------------------------------------------------------------------
// Refinement errors and convergence orders
// ---------------------------------------------------------------------------

struct PairErrors {
  double e_rho = 0.0;  // L1 in time of the spatial L1 difference
  double e_y = 0.0;    // sup over step times of the position difference
};

namespace detail {

/// Spatial L1 distance on the fine mesh; the coarse profile is prolonged
/// piecewise-constantly (fine cells 2j, 2j+1 lie inside coarse cell j).
inline double l1_prolonged(const std::vector<double>& coarse, const std::vector<double>& fine,
                           double dx_fine) {
  double sum = 0.0;
  for (std::size_t i = 0; i < fine.size(); ++i) sum += std::abs(coarse[i / 2] - fine[i]);
  return sum * dx_fine;
}

inline double l1_same(const std::vector<double>& a, const std::vector<double>& b, double dx) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum * dx;
}

}  // namespace detail

/// Errors between a run and its half-mesh refinement, from stored states.
/// The time integral uses left-endpoint rectangles on the coarse clock.
inline PairErrors refinement_errors(const RunConfig& fine_cfg, const Trajectory& fine,
                                    const RunConfig& coarse_cfg, const Trajectory& coarse) {
  const Grid& gf = fine_cfg.grid;
  const Grid& gc = coarse_cfg.grid;
  if (gf.cells != 2 * gc.cells || gf.x_min != gc.x_min || gf.x_max != gc.x_max)
    throw std::invalid_argument("refinement_errors: fine grid must halve the coarse mesh");
  if (fine.states.empty() || coarse.states.empty())
    throw std::invalid_argument("refinement_errors: both runs must store full states");
  PairErrors e;
  const long Nc = static_cast<long>(coarse.states.size()) - 1;
  for (long n = 0; n <= Nc; ++n) {
    double tn = coarse.t[n];
    // the fine state whose time interval contains tn
    long mf = std::min<long>(2 * n, static_cast<long>(fine.states.size()) - 1);
    while (mf + 1 < static_cast<long>(fine.states.size()) && fine.t[mf + 1] <= tn) ++mf;
    while (mf > 0 && fine.t[mf] > tn) --mf;
    e.e_y = std::max(e.e_y, std::abs(coarse.y[n] - fine.y[mf]));
    if (n < Nc) {
      double w = coarse.t[n + 1] - tn;
      e.e_rho += w * detail::l1_prolonged(coarse.states[n], fine.states[mf], gf.dx);
    }
  }
  return e;
}

/// Same-mesh errors between two runs (nonlocal vs local coupling).
inline PairErrors model_gap_errors(const RunConfig& cfg_a, const Trajectory& a,
                                   const RunConfig& cfg_b, const Trajectory& b) {
  if (cfg_a.grid != cfg_b.grid || a.dt != b.dt || a.steps != b.steps)
    throw std::invalid_argument("model_gap_errors: runs must share the grid and time step");
  if (a.states.empty() || b.states.empty())
    throw std::invalid_argument("model_gap_errors: both runs must store full states");
  PairErrors e;
  const long N = static_cast<long>(a.states.size()) - 1;
  for (long n = 0; n <= N; ++n) {
    e.e_y = std::max(e.e_y, std::abs(a.y[n] - b.y[n]));
    if (n < N) {
      double w = a.t[n + 1] - a.t[n];
      e.e_rho += w * detail::l1_same(a.states[n], b.states[n], cfg_a.grid.dx);
    }
  }
  return e;
}

struct RefinementStudy {
  std::vector<int> cells;
  std::vector<double> e_rho, e_y;
};

/// Least-squares slope of log2(error) against the refinement level, negated.
inline double convergence_order(std::span<const double> errors) {
  if (errors.size() < 3)
    throw std::invalid_argument("convergence_order: need at least 3 levels");
  const std::size_t n = errors.size();
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(errors[i] > 0.0)) throw std::domain_error("convergence_order: errors must be positive");
    double x = static_cast<double>(i), y = std::log2(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -slope;
}

inline std::pair<double, double> convergence_order(const RefinementStudy& st) {
  return {convergence_order(st.e_rho), convergence_order(st.e_y)};
}

// ---------------------------------------------------------------------------
// Continuous-dependence probe
// ---------------------------------------------------------------------------

struct StabilitySeries {
  std::vector<double> t, l1_gap, y_gap;
};

/// Runs two configs differing only in their initial data side by side and
/// records the L1 and position gaps at every step time.
inline StabilitySeries stability_probe(const RunConfig& a, const RunConfig& b) {
  if (a.grid != b.grid || a.mode != b.mode || !(a.model == b.model) || a.T != b.T)
    throw std::invalid_argument("stability_probe: configs may differ only in initial data");
  Simulation sa(a), sb(b);
  if (sa.total_steps() != sb.total_steps())
    throw std::invalid_argument("stability_probe: runs disagree on the step count");
  StabilitySeries out;
  auto record = [&] {
    out.t.push_back(sa.t());
    out.l1_gap.push_back(detail::l1_same(sa.rho(), sb.rho(), a.grid.dx));
    out.y_gap.push_back(std::abs(sa.y() - sb.y()));
  };
  record();
  while (!sa.done()) {
    sa.advance();
    sb.advance();
    record();
  }
  return out;
}

}  // namespace busflow
