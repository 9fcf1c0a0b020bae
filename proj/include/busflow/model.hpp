#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace busflow {

/// Error raised while ingesting config files or preset overrides.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require_domain(bool cond, const char* msg) {
  if (!cond) throw std::domain_error(msg);
}

// Maximizer of a unimodal function on [lo, hi] by golden-section search.
template <class Fn>
double golden_max(Fn&& g, double lo, double hi, double tol = 1e-12) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double g1 = g(x1), g2 = g(x2);
  for (int it = 0; it < 400 && (b - a) > tol; ++it) {
    if (g1 < g2) {
      a = x1;
      x1 = x2;
      g1 = g2;
      x2 = a + phi * (b - a);
      g2 = g(x2);
    } else {
      b = x2;
      x2 = x1;
      g2 = g1;
      x1 = b - phi * (b - a);
      g1 = g(x1);
    }
  }
  return 0.5 * (a + b);
}

// Root of a monotone function on [lo, hi] with g(lo), g(hi) bracketing zero.
template <class Fn>
double bisect(Fn&& g, double lo, double hi, double tol = 1e-12, int max_iter = 200) {
  double glo = g(lo);
  for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
    double mid = 0.5 * (lo + hi);
    double gm = g(mid);
    if ((glo <= 0.0) == (gm <= 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Integral of a piecewise-constant function over [a, b]. `edges` has one more
// entry than `values`; the function vanishes outside [edges.front(), edges.back()].
inline double pcw_integral(const std::vector<double>& edges, const std::vector<double>& values,
                           double a, double b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double lo = std::max(a, edges[i]);
    double hi = std::min(b, edges[i + 1]);
    if (hi > lo) sum += values[i] * (hi - lo);
  }
  return sum;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fundamental diagram
// ---------------------------------------------------------------------------

enum class CurveKind : std::uint8_t { Quadratic, Tabulated };

/// Bell-shaped fundamental diagram on [0, R]: f(0) = f(R) = 0 with a single
/// interior maximum. Built-in quadratic form f(rho) = scale * rho * (R - rho);
/// tabulated curves are piecewise linear through strictly unimodal nodes.
struct FluxCurve {
  CurveKind kind = CurveKind::Quadratic;
  double max_density = 1.0;  // R
  double scale = 1.0;
  std::vector<double> xs, ys;

  static FluxCurve quadratic(double R = 1.0, double scale = 1.0) {
    detail::require_domain(R > 0.0 && scale > 0.0, "flux curve: R and scale must be positive");
    FluxCurve c;
    c.kind = CurveKind::Quadratic;
    c.max_density = R;
    c.scale = scale;
    return c;
  }

  static FluxCurve tabulated(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() < 3 || xs.size() != ys.size())
      throw std::invalid_argument("tabulated flux: need >= 3 matching nodes");
    if (xs.front() != 0.0 || ys.front() != 0.0 || ys.back() != 0.0)
      throw std::invalid_argument("tabulated flux: must satisfy f(0) = f(R) = 0");
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("tabulated flux: nodes must increase");
    // strictly unimodal node sequence
    std::size_t peak = 0;
    while (peak + 1 < ys.size() && ys[peak + 1] > ys[peak]) ++peak;
    for (std::size_t i = peak; i + 1 < ys.size(); ++i)
      if (!(ys[i + 1] < ys[i])) throw std::invalid_argument("tabulated flux: not unimodal");
    if (peak == 0) throw std::invalid_argument("tabulated flux: not unimodal");
    FluxCurve c;
    c.kind = CurveKind::Tabulated;
    c.max_density = xs.back();
    c.xs = std::move(xs);
    c.ys = std::move(ys);
    return c;
  }

  double operator()(double rho) const {
    if (kind == CurveKind::Quadratic) return scale * rho * (max_density - rho);
    auto it = std::upper_bound(xs.begin(), xs.end(), rho);
    std::size_t i = it == xs.begin() ? 1 : std::min<std::size_t>(it - xs.begin(), xs.size() - 1);
    double t = (rho - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
  }

  /// One-sided derivative (segment slope at tabulated kinks).
  double derivative(double rho) const {
    if (kind == CurveKind::Quadratic) return scale * (max_density - 2.0 * rho);
    auto it = std::upper_bound(xs.begin(), xs.end(), rho);
    std::size_t i = it == xs.begin() ? 1 : std::min<std::size_t>(it - xs.begin(), xs.size() - 1);
    return (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
  }

  /// ||f'||_inf over [0, R].
  double lipschitz() const {
    if (kind == CurveKind::Quadratic) return scale * max_density;
    double m = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      m = std::max(m, std::abs((ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])));
    return m;
  }

  bool operator==(const FluxCurve& o) const = default;
};

// ---------------------------------------------------------------------------
// Vehicle speed law
// ---------------------------------------------------------------------------

enum class OmegaKind : std::uint8_t { LwrMin, RationalThenLinear, Tabulated };

/// Nonincreasing Lipschitz speed law rho -> omega(rho), values in [0, Sigma].
/// Two built-in families plus a tabulated (piecewise-linear) escape hatch.
struct OmegaLaw {
  OmegaKind kind = OmegaKind::LwrMin;
  double v_bus = 0.3;                           // LwrMin: min{v_bus, 1 - rho}
  double alpha = 0.0, beta = 0.0, rho_star = 0.0;  // RationalThenLinear
  std::vector<double> xs, ys;                   // Tabulated

  static OmegaLaw lwr_min(double v_bus) {
    detail::require_domain(v_bus > 0.0, "omega: v_bus must be positive");
    OmegaLaw w;
    w.kind = OmegaKind::LwrMin;
    w.v_bus = v_bus;
    return w;
  }

  /// alpha/(beta+rho)^2 on [0, rho_star], then 1 - rho. Continuity at rho_star
  /// is required and checked.
  static OmegaLaw rational_then_linear(double alpha, double beta, double rho_star) {
    detail::require_domain(alpha > 0.0 && beta > 0.0 && rho_star > 0.0 && rho_star < 1.0,
                           "omega: invalid rational parameters");
    OmegaLaw w;
    w.kind = OmegaKind::RationalThenLinear;
    w.alpha = alpha;
    w.beta = beta;
    w.rho_star = rho_star;
    double left = alpha / ((beta + rho_star) * (beta + rho_star));
    if (std::abs(left - (1.0 - rho_star)) > 1e-10)
      throw std::invalid_argument("omega: rational and linear branches do not match at rho_star");
    return w;
  }

  static OmegaLaw tabulated(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() < 2 || xs.size() != ys.size())
      throw std::invalid_argument("tabulated omega: need >= 2 matching nodes");
    for (std::size_t i = 1; i < xs.size(); ++i) {
      if (!(xs[i] > xs[i - 1])) throw std::invalid_argument("tabulated omega: nodes must increase");
      if (ys[i] > ys[i - 1]) throw std::invalid_argument("tabulated omega: must be nonincreasing");
    }
    if (ys.back() < 0.0) throw std::invalid_argument("tabulated omega: negative values");
    OmegaLaw w;
    w.kind = OmegaKind::Tabulated;
    w.xs = std::move(xs);
    w.ys = std::move(ys);
    return w;
  }

  double operator()(double rho) const {
    double v;
    switch (kind) {
      case OmegaKind::LwrMin:
        v = std::min(v_bus, 1.0 - rho);
        break;
      case OmegaKind::RationalThenLinear:
        v = rho <= rho_star ? alpha / ((beta + rho) * (beta + rho)) : 1.0 - rho;
        break;
      default: {
        if (rho <= xs.front()) return ys.front();
        if (rho >= xs.back()) return ys.back();
        auto it = std::upper_bound(xs.begin(), xs.end(), rho);
        std::size_t i = it - xs.begin();
        double t = (rho - xs[i - 1]) / (xs[i] - xs[i - 1]);
        v = ys[i - 1] + t * (ys[i] - ys[i - 1]);
      }
    }
    return std::clamp(v, 0.0, sup());
  }

  /// Sigma = sup omega.
  double sup() const {
    switch (kind) {
      case OmegaKind::LwrMin:
        return v_bus;
      case OmegaKind::RationalThenLinear:
        return alpha / (beta * beta);
      default:
        return ys.front();
    }
  }

  bool operator==(const OmegaLaw& o) const = default;
};

/// Calibrates the rational branch so that omega(0) = v0 and omega(rho_star) = v1.
/// Requires v1 = 1 - rho_star (continuity with the linear branch).
inline std::pair<double, double> calibrate_rational_omega(double v0, double v1, double rho_star) {
  if (!(0.0 < v1 && v1 < v0))
    throw std::invalid_argument("calibrate_rational_omega: need 0 < v1 < v0");
  if (std::abs(v1 - (1.0 - rho_star)) > 1e-12)
    throw std::invalid_argument("calibrate_rational_omega: v1 must equal 1 - rho_star");
  double beta = rho_star / (std::sqrt(v0 / v1) - 1.0);
  double alpha = v0 * beta * beta;
  return {alpha, beta};
}

// ---------------------------------------------------------------------------
// Constraint law
// ---------------------------------------------------------------------------

/// Flux cap through the vehicle position, Q(s) = coeff * ((1-s)/2)^2.
struct ConstraintLaw {
  double coeff = 0.6;

  explicit ConstraintLaw(double c = 0.6) : coeff(c) {
    detail::require_domain(c >= 0.0 && c <= 1.0, "constraint law: coefficient must be in [0,1]");
  }

  double operator()(double s) const {
    double h = 0.5 * (1.0 - s);
    return coeff * h * h;
  }

  bool operator==(const ConstraintLaw& o) const = default;
};

// ---------------------------------------------------------------------------
// Model bundle
// ---------------------------------------------------------------------------

struct GapResult {
  double value = 0.0;   // min_s (max_rho F(s,rho) - Q(s))
  bool satisfied = false;  // value > 0
};

/// Immutable bundle of the continuous model data: fundamental diagram f,
/// speed law omega, constraint law Q, and the derived bound Sigma = sup omega.
/// F(s, rho) = f(rho) - s * rho is the flux seen in the vehicle frame.
struct FluxModel {
  FluxCurve f;
  OmegaLaw omega;
  ConstraintLaw Q;
  double sigma = 0.0;

  static FluxModel make(FluxCurve f, OmegaLaw omega, ConstraintLaw Q) {
    FluxModel m;
    m.f = std::move(f);
    m.omega = std::move(omega);
    m.Q = Q;
    m.sigma = m.omega.sup();
    detail::require_domain(m.sigma >= 0.0, "model: omega must be nonnegative");
    // argmax F(s, .) must stay interior for every s in [0, Sigma]
    if (m.critical_density_impl(m.sigma) <= 0.0)
      throw std::domain_error("model: argmax F(Sigma, .) is not positive (Sigma too large)");
    return m;
  }

  double max_density() const { return f.max_density; }

  /// F(s, rho) = f(rho) - s * rho.
  double flux(double s, double rho) const {
    check_speed(s);
    check_density(rho);
    return f(rho) - s * rho;
  }

  /// The unique maximizer of F(s, .) on [0, R].
  double critical_density(double s) const {
    check_speed(s);
    return critical_density_impl(s);
  }

  /// max_rho F(s, rho).
  double max_flux(double s) const {
    check_speed(s);
    double c = critical_density_impl(s);
    return f(c) - s * c;
  }

  /// The densities rho_check < rho_hat with F(s, rho_check) = F(s, rho_hat) = q.
  std::pair<double, double> constraint_roots(double s, double q) const {
    check_speed(s);
    detail::require_domain(q >= 0.0, "constraint_roots: q must be nonnegative");
    double crit = critical_density_impl(s);
    double fmax = f(crit) - s * crit;
    if (q > fmax * (1.0 + 1e-12) + 1e-300)
      throw std::domain_error("constraint_roots: q exceeds the maximal flux (infeasible constraint)");
    q = std::min(q, fmax);
    const double R = f.max_density;
    if (f.kind == CurveKind::Quadratic) {
      // scale*rho^2 - (scale*R - s)*rho + q = 0
      double a = f.scale, b = a * R - s;
      double disc = std::max(0.0, b * b - 4.0 * a * q);
      double sq = std::sqrt(disc);
      double hat = (b + sq) / (2.0 * a);
      double chk = q == 0.0 ? 0.0 : (2.0 * q) / (b + sq);
      return {chk, hat};
    }
    auto F = [&](double r) { return f(r) - s * r; };
    double chk = detail::bisect([&](double r) { return F(r) - q; }, 0.0, crit);
    double hat = detail::bisect([&](double r) { return q - F(r); }, crit, R);
    return {chk, hat};
  }

  /// min_s (max_rho F(s, rho) - Q(s)) over a uniform sample of [0, Sigma].
  /// A positive value certifies the constraint-gap hypothesis behind the BV bound.
  GapResult constraint_gap(int samples = 1001) const {
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
      double s = sigma * static_cast<double>(i) / static_cast<double>(samples - 1);
      worst = std::min(worst, max_flux(s) - Q(s));
    }
    return {worst, worst > 0.0};
  }

  bool operator==(const FluxModel& o) const = default;

 private:
  double critical_density_impl(double s) const {
    const double R = f.max_density;
    if (f.kind == CurveKind::Quadratic)
      return std::clamp((f.scale * R - s) / (2.0 * f.scale), 0.0, R);
    return detail::golden_max([&](double r) { return f(r) - s * r; }, 0.0, R);
  }

  void check_speed(double s) const {
    detail::require_domain(s >= -1e-12 && s <= sigma + 1e-12, "speed out of [0, Sigma]");
  }
  void check_density(double rho) const {
    detail::require_domain(rho >= -1e-12 && rho <= f.max_density + 1e-12,
                           "density out of [0, R]");
  }
};

// ---------------------------------------------------------------------------
// Weight function
// ---------------------------------------------------------------------------

/// Nonnegative piecewise-constant weight with compact support. The built-in
/// family mu_k = 2^k on [0, 2^-k] has unit mass exactly.
struct WeightProfile {
  std::vector<double> edges;   // size m+1
  std::vector<double> values;  // size m
  int k = -1;                  // >= 1 for the built-in family

  static WeightProfile mu_k(int k) {
    if (k < 1 || k > 40) throw std::invalid_argument("mu_k: k must be in [1, 40]");
    WeightProfile w;
    w.edges = {0.0, std::ldexp(1.0, -k)};
    w.values = {std::ldexp(1.0, k)};
    w.k = k;
    return w;
  }

  static WeightProfile piecewise(std::vector<double> edges, std::vector<double> values) {
    if (edges.size() != values.size() + 1 || values.empty())
      throw std::invalid_argument("weight: edges must outnumber values by one");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("weight: edges must increase");
    for (double v : values)
      if (v < 0.0) throw std::invalid_argument("weight: values must be nonnegative");
    WeightProfile w;
    w.edges = std::move(edges);
    w.values = std::move(values);
    return w;
  }

  double mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * (edges[i + 1] - edges[i]);
    return m;
  }

  double total_variation() const {
    double tv = std::abs(values.front()) + std::abs(values.back());
    for (std::size_t i = 1; i < values.size(); ++i) tv += std::abs(values[i] - values[i - 1]);
    return tv;
  }

  double support_lo() const { return edges.front(); }
  double support_hi() const { return edges.back(); }

  bool operator==(const WeightProfile& o) const = default;
};

// ---------------------------------------------------------------------------
// Piecewise-constant density profiles (initial data, given in road coordinates)
// ---------------------------------------------------------------------------

/// values[i] on (breaks[i-1], breaks[i]); constant tails outside the break list.
struct PiecewiseConstantProfile {
  std::vector<double> breaks;  // may be empty (constant profile)
  std::vector<double> values;  // size breaks.size() + 1

  static PiecewiseConstantProfile constant(double v) { return {{}, {v}}; }

  static PiecewiseConstantProfile make(std::vector<double> breaks, std::vector<double> values) {
    if (values.size() != breaks.size() + 1)
      throw std::invalid_argument("profile: need one more value than breaks");
    for (std::size_t i = 1; i < breaks.size(); ++i)
      if (!(breaks[i] > breaks[i - 1])) throw std::invalid_argument("profile: breaks must increase");
    return {std::move(breaks), std::move(values)};
  }

  double operator()(double x) const {
    std::size_t i = std::upper_bound(breaks.begin(), breaks.end(), x) - breaks.begin();
    return values[i];
  }

  /// Exact mean value over [a, b].
  double average(double a, double b) const {
    double sum = 0.0, lo = a;
    for (std::size_t i = 0; i < breaks.size(); ++i) {
      double hi = std::min(b, breaks[i]);
      if (hi > lo) sum += values[i] * (hi - lo);
      lo = std::max(lo, std::min(b, breaks[i]));
    }
    if (b > lo) sum += values.back() * (b - lo);
    return sum / (b - a);
  }

  double min_value() const { return *std::min_element(values.begin(), values.end()); }
  double max_value() const { return *std::max_element(values.begin(), values.end()); }

  bool operator==(const PiecewiseConstantProfile& o) const = default;
};

}  // namespace busflow
