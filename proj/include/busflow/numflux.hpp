#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "busflow/model.hpp"

namespace busflow {

enum class FluxKind : std::uint8_t { Godunov, Rusanov, EngquistOsher };

/// Diffusion constant used by the Rusanov flux: the global bound
/// ||f'||_inf + s, or the edge-local wave speed max(|F'(a)|, |F'(b)|).
enum class RusanovMode : std::uint8_t { Global, Local };

namespace detail {

inline double rusanov_combine(double Fa, double Fb, double C, double a, double b) {
  return 0.5 * (Fa + Fb) - 0.5 * C * (b - a);
}

/// Per-step evaluation context for one numerical flux: the s-frozen flux
/// F(s, .), its maximizer and the Rusanov diffusion constant.
struct EdgeFlux {
  const FluxCurve* curve = nullptr;
  double s = 0.0;
  FluxKind kind = FluxKind::Godunov;
  RusanovMode mode = RusanovMode::Global;
  double crit = 0.0;   // argmax F(s, .)
  double fcrit = 0.0;  // F(s, crit)
  double diff = 0.0;   // ||f'||_inf + s

  static EdgeFlux make(const FluxModel& m, FluxKind kind, double s,
                       RusanovMode mode = RusanovMode::Global) {
    EdgeFlux e;
    e.curve = &m.f;
    e.s = s;
    e.kind = kind;
    e.mode = mode;
    e.crit = m.critical_density(s);
    e.fcrit = e.F(e.crit);
    e.diff = m.f.lipschitz() + s;
    return e;
  }

  double F(double rho) const { return (*curve)(rho) - s * rho; }
  // Local diffusion constant. The relative inflation keeps the flux strictly
  // dissipative where C and the secant slope coincide (vacuum and jam edges),
  // so rounding noise cannot push cells outside [0, R].
  double local_diff(double a, double b) const {
    return std::max(std::abs(curve->derivative(a) - s), std::abs(curve->derivative(b) - s)) *
           (1.0 + 1e-13);
  }

  double operator()(double a, double b) const {
    switch (kind) {
      case FluxKind::Godunov:
        return a <= b ? std::min(F(a), F(b)) : F(std::clamp(crit, b, a));
      case FluxKind::Rusanov: {
        double C = mode == RusanovMode::Global ? diff : local_diff(a, b);
        return rusanov_combine(F(a), F(b), C, a, b);
      }
      default:  // Engquist-Osher
        return F(std::min(a, crit)) + F(std::max(b, crit)) - fcrit;
    }
  }
};

}  // namespace detail

/// Godunov flux for the bell-shaped F(s, .): exact Riemann flux via the
/// endpoint-or-critical closed form.
inline double godunov_flux(const FluxModel& m, double s, double a, double b) {
  m.flux(s, a);  // domain checks
  m.flux(s, b);
  return detail::EdgeFlux::make(m, FluxKind::Godunov, s)(a, b);
}

/// Rusanov flux; the default diffusion constant is the global ||f'||_inf + s.
inline double rusanov_flux(const FluxModel& m, double s, double a, double b,
                           RusanovMode mode = RusanovMode::Global) {
  m.flux(s, a);
  m.flux(s, b);
  return detail::EdgeFlux::make(m, FluxKind::Rusanov, s, mode)(a, b);
}

/// Engquist-Osher flux, bell-shaped closed form.
inline double engquist_osher_flux(const FluxModel& m, double s, double a, double b) {
  m.flux(s, a);
  m.flux(s, b);
  return detail::EdgeFlux::make(m, FluxKind::EngquistOsher, s)(a, b);
}

inline double numerical_flux(const FluxModel& m, FluxKind kind, double s, double a, double b,
                             RusanovMode mode = RusanovMode::Global) {
  switch (kind) {
    case FluxKind::Godunov:
      return godunov_flux(m, s, a, b);
    case FluxKind::Rusanov:
      return rusanov_flux(m, s, a, b, mode);
    default:
      return engquist_osher_flux(m, s, a, b);
  }
}

/// Constrained interface flux: min of the base flux and the cap q.
inline double interface_flux(const FluxModel& m, FluxKind base, double s, double q, double a,
                             double b, RusanovMode mode = RusanovMode::Global) {
  detail::require_domain(q >= 0.0, "interface_flux: q must be nonnegative");
  return std::min(numerical_flux(m, base, s, a, b, mode), q);
}

/// CFL constant L such that dt/dx * L <= 1 guarantees scheme monotonicity:
/// L = 2 (||f'||_inf + Sigma).
inline double cfl_constant(const FluxModel& m, FluxKind /*kind*/ = FluxKind::Rusanov) {
  return 2.0 * (m.f.lipschitz() + m.sigma);
}

}  // namespace busflow
