#pragma once
// The reference profile U, the two-dimensional profiles v_{a,b}, and the
// barrier family V_{S,a,b} built over a quadratic surface S, together with
// the algebraic predicates on them (class membership, subsolution margin,
// separation polynomial gamma_V, nearby-surface ordering).

#include <complex>
#include <functional>
#include <optional>

#include "thinfb/core.hpp"

namespace thinfb {

/// Point X = (x', x_n, s) in R^{n+1}; x' is empty when n = 1.
struct Point {
  Vec xp;  // tangential block, dimension n-1
  double xn = 0;
  double s = 0;

  static Point plane(double xn, double s) { return Point{Vec::zeros(0), xn, s}; }
  static Point make(const Vec& xp, double xn, double s) { return Point{xp, xn, s}; }
  int nn() const { return xp.size() + 1; }  // the n of R^n x R
  double r() const { return std::hypot(xn, s); }
  double norm() const { return std::sqrt(xp.dot(xp) + xn * xn + s * s); }
  Point shifted_en(double c) const { return Point{xp, xn + c, s}; }
};

inline bool in_P(const Point& x) { return x.s == 0.0 && x.xn <= 0.0; }
inline bool in_L(const Point& x) { return x.s == 0.0 && x.xn == 0.0; }

/// Distance from the plane point (t,s) to the slit {t <= 0, s = 0}.
inline double dist_to_slit(double t, double s) {
  return t > 0 ? std::hypot(t, s) : std::fabs(s);
}

/// Polar data of a plane point, slit along {t <= 0, s = 0}.
struct PlaneCoords {
  double t = 0, s = 0;
  double rho = 0;
  double beta = 0;  // atan2(s, t) in [-pi, pi]
  PlaneCoords(double t_, double s_) : t(t_), s(s_), rho(std::hypot(t_, s_)), beta(std::atan2(s_, t_)) {}
};

/// U(t,s) = rho^{1/2} cos(beta/2), evaluated through the closed form
/// sqrt((rho+t)/2). Vanishes exactly on the slit.
inline double eval_U(double t, double s) {
  double rho = std::hypot(t, s);
  return std::sqrt(std::max(0.0, 0.5 * (rho + t)));
}

inline double eval_U(const Point& x) { return eval_U(x.xn, x.s); }

// Derivatives of U via the holomorphic representation U = Re sqrt(z),
// z = t + i s; std::sqrt's branch cut coincides with the slit. Not valid on
// the slit itself.
inline double U_t(double t, double s) {
  std::complex<double> d = 0.5 / std::sqrt(std::complex<double>(t, s));
  return d.real();
}
inline double U_s(double t, double s) {
  std::complex<double> d = 0.5 / std::sqrt(std::complex<double>(t, s));
  return -d.imag();
}
inline double U_tt(double t, double s) {
  std::complex<double> z(t, s);
  std::complex<double> d2 = -0.25 / (z * std::sqrt(z));
  return d2.real();
}
inline double U_ts(double t, double s) {
  std::complex<double> z(t, s);
  std::complex<double> d2 = -0.25 / (z * std::sqrt(z));
  return -d2.imag();
}
inline double U_ss(double t, double s) { return -U_tt(t, s); }

/// v_{a,b}(t,s) = (1 + a/4 rho + b/2 t) U(t,s).
inline double eval_v_ab(double a, double b, double t, double s) {
  double rho = std::hypot(t, s);
  return (1.0 + 0.25 * a * rho + 0.5 * b * t) * eval_U(t, s);
}

/// Graph surface S = { x_n = 1/2 x'^T M x' + xi' . x' }.
struct QuadraticSurface {
  SymMat M;
  Vec xi;

  static QuadraticSurface plane(int tangent_dim) {
    return QuadraticSurface{SymMat::zeros(tangent_dim), Vec::zeros(tangent_dim)};
  }
  int tangent_dim() const { return xi.size(); }
  double height(const Vec& xp) const { return 0.5 * M.quad(xp) + xi.dot(xp); }
  Vec grad_height(const Vec& xp) const { return M.mul(xp).plus(xi); }
};

struct SignedDistance {
  double t = 0;          // signed distance, positive above S in the e_n direction
  Vec foot;              // tangential coordinates of the foot point on S
  bool vertical_fallback = false;
  int iterations = 0;
};

struct SignedDistanceOptions {
  double max_curvature = 1.0;  // require ||M|| below this for well-posedness
  int max_iterations = 50;
  double tolerance = 1e-12;
  bool allow_vertical_fallback = true;
};

/// Signed distance from x = (x', x_n) to S by projected Newton started at the
/// vertical projection. Stationarity: q - x' + (h(q) - x_n) grad h(q) = 0.
inline SignedDistance signed_distance(const QuadraticSurface& surf, const Vec& xp, double xn,
                                      const SignedDistanceOptions& opt = {}) {
  require(surf.M.op_norm() <= opt.max_curvature, Err::PreconditionViolation,
          "signed_distance: surface curvature too large");
  const int d = surf.tangent_dim();
  double vertical = xn - surf.height(xp);
  if (d == 0) return SignedDistance{xn, Vec::zeros(0), false, 0};

  SignedDistance out;
  out.foot = xp;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    out.iterations = it;
    Vec grad = surf.grad_height(out.foot);
    double gap = surf.height(out.foot) - xn;
    Vec f = out.foot.plus(xp, -1.0).plus(grad, gap);
    if (f.max_abs() <= opt.tolerance) {
      double dn = 0;
      for (int i = 0; i < d; ++i) {
        double di = out.foot[i] - xp[i];
        dn += di * di;
      }
      dn += gap * gap;
      double dist = std::sqrt(dn);
      if (dist > std::fabs(vertical) + 1e-10) break;  // stationary but not nearest
      out.t = (vertical >= 0 ? dist : -dist);
      if (vertical == 0.0) out.t = 0.0;
      return out;
    }
    // J = I + grad grad^T + gap * M
    std::vector<double> jac(static_cast<size_t>(d * d), 0.0), rhs(static_cast<size_t>(d), 0.0);
    for (int i = 0; i < d; ++i) {
      rhs[static_cast<size_t>(i)] = -f[i];
      for (int j = 0; j < d; ++j)
        jac[static_cast<size_t>(i * d + j)] =
            (i == j ? 1.0 : 0.0) + grad[i] * grad[j] + gap * surf.M.at(i, j);
    }
    std::vector<double> step = solve_dense(std::move(jac), std::move(rhs));
    for (int i = 0; i < d; ++i) out.foot[i] += step[static_cast<size_t>(i)];
  }
  if (!opt.allow_vertical_fallback)
    fail(Err::NoConvergence, "signed_distance: Newton budget exhausted");
  out.foot = xp;
  out.t = vertical;
  out.vertical_fallback = true;
  return out;
}

/// Barrier parameters (S, a, b) defining V_{S,a,b}.
struct BarrierParams {
  QuadraticSurface surface;
  double a = 0;
  double b = 0;

  static BarrierParams planar(int tangent_dim, double a = 0, double b = 0) {
    return BarrierParams{QuadraticSurface::plane(tangent_dim), a, b};
  }
  double margin() const { return a + b - surface.M.trace(); }
};

inline bool in_class_V(const BarrierParams& v, double delta) {
  return v.surface.M.op_norm() <= delta && v.surface.xi.norm() <= delta &&
         std::fabs(v.a) <= delta && std::fabs(v.b) <= delta;
}

inline bool in_class_V0(const BarrierParams& v, double delta, double constraint_tol = 1e-12) {
  return in_class_V(v, delta) && std::fabs(v.margin()) <= constraint_tol;
}

/// Plane coordinates of X relative to the barrier's surface: t is the signed
/// distance from x to S, s is unchanged.
inline PlaneCoords plane_coords(const BarrierParams& v, const Point& x,
                                const SignedDistanceOptions& opt = {}) {
  SignedDistance sd = signed_distance(v.surface, x.xp, x.xn, opt);
  return PlaneCoords(sd.t, x.s);
}

/// V_{S,a,b}(X) = v_{a,b}(t,s).
inline double eval_V(const BarrierParams& v, const Point& x, const SignedDistanceOptions& opt = {}) {
  PlaneCoords pc = plane_coords(v, x, opt);
  return eval_v_ab(v.a, v.b, pc.t, pc.s);
}

/// gamma_V(X) = a/2 r^2 + b r x_n - 1/2 x'^T M x' - xi' . x', r^2 = x_n^2 + s^2.
inline double gamma_V(const BarrierParams& v, const Point& x) {
  double r = x.r();
  return 0.5 * v.a * r * r + v.b * r * x.xn - 0.5 * v.surface.M.quad(x.xp) - v.surface.xi.dot(x.xp);
}

struct BarrierConfig {
  double C0 = 10.0;      // subsolution margin constant
  double C1 = 10.0;      // separation constant (recorded, not asserted)
  double delta0 = 0.1;   // largest delta the class predicates accept
};

/// a + b - tr M >= C0 delta^2 (Vsub). Throws ClassViolation when V is not in
/// V_delta for the given delta.
inline bool subsolution_check(const BarrierParams& v, double delta, double C0) {
  require(in_class_V(v, delta), Err::ClassViolation, "subsolution_check: V not in V_delta");
  return v.margin() >= C0 * delta * delta;
}

// Fourth-order central second derivative of a scalar callable along one axis.
template <class F>
double second_derivative_fd4(const F& f, double x, double h) {
  return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

/// Fourth-order finite-difference Laplacian of a field R^{n+1} -> R at X.
template <class F>
double laplacian_fd4(const F& f, const Point& x, double h) {
  double lap = 0;
  const int d = x.xp.size();
  for (int axis = 0; axis < d; ++axis) {
    lap += second_derivative_fd4(
        [&](double q) {
          Point y = x;
          y.xp[axis] = q;
          return f(y);
        },
        x.xp[axis], h);
  }
  lap += second_derivative_fd4(
      [&](double q) {
        Point y = x;
        y.xn = q;
        return f(y);
      },
      x.xn, h);
  lap += second_derivative_fd4(
      [&](double q) {
        Point y = x;
        y.s = q;
        return f(y);
      },
      x.s, h);
  return lap;
}

struct LaplacianSample {
  Point x;
  double laplacian = 0;
  double step = 0;
};

struct LaplacianAuditConfig {
  int sample_count = 200;
  double radius = 1.8;          // audit ball radius (inside B_2)
  double min_plane_dist = 0.05; // keep (t,s) at least this far from the slit
  double step_fraction = 0.025; // FD step = fraction of the slit distance
  double max_step = 0.02;
};

/// Samples the finite-difference Laplacian of eval_V over B^+_R(V), with the
/// FD step scaled to the local distance from the slit so every audited point
/// sits at >= 10 steps from it.
inline std::vector<LaplacianSample> sample_laplacian_V(const BarrierParams& v, Rng& rng,
                                                       const LaplacianAuditConfig& cfg = {}) {
  std::vector<LaplacianSample> out;
  const int d = v.surface.tangent_dim();
  auto f = [&](const Point& p) { return eval_V(v, p); };
  int guard = 0;
  while (static_cast<int>(out.size()) < cfg.sample_count && guard++ < cfg.sample_count * 100) {
    Point x;
    x.xp = Vec::zeros(d);
    for (int i = 0; i < d; ++i) x.xp[i] = rng.uniform(-cfg.radius, cfg.radius);
    x.xn = rng.uniform(-cfg.radius, cfg.radius);
    x.s = rng.uniform(0.0, cfg.radius);
    if (x.norm() > cfg.radius) continue;
    PlaneCoords pc = plane_coords(v, x);
    double dist = dist_to_slit(pc.t, pc.s);
    if (dist < cfg.min_plane_dist) continue;
    if (eval_v_ab(v.a, v.b, pc.t, pc.s) <= 0) continue;  // outside the positivity set
    double h = std::min(cfg.max_step, cfg.step_fraction * dist);
    out.push_back({x, laplacian_fd4(f, x, h), h});
  }
  require(static_cast<int>(out.size()) == cfg.sample_count, Err::PreconditionViolation,
          "sample_laplacian_V: could not draw enough interior samples");
  return out;
}

struct OrderingConfig {
  double C_max = 32.0;     // audit bound on the admissible constant
  double C_step = 0.25;    // granularity of the C grid search
  double small_c = 0.25;   // largest eps, sigma accepted by the lemma's hypotheses
  int lattice_per_axis = 9;
  double compare_slack = 1e-12;
};

/// Lemma-style ordering of nearby barriers: smallest shift = C eps sigma^2
/// from a C grid with V1(X) <= V2(X + shift e_n) on a lattice of B_sigma.
/// vertical_offset_2 raises V2's surface by a constant, h2 -> h2 + c; the
/// graph form itself has no constant term, and a raised surface evaluates as
/// V2(X - c e_n).
inline double order_nearby_surfaces(const BarrierParams& v1, const BarrierParams& v2, double sigma,
                                    double eps, double vertical_offset_2 = 0.0,
                                    const OrderingConfig& cfg = {}) {
  require(std::fabs(v1.a) <= 2 && std::fabs(v1.b) <= 2 && std::fabs(v2.a) <= 2 && std::fabs(v2.b) <= 2,
          Err::PreconditionViolation, "order_nearby_surfaces: |a|,|b| must be <= 2");
  require(eps > 0 && eps <= cfg.small_c && sigma > 0 && sigma <= cfg.small_c,
          Err::PreconditionViolation, "order_nearby_surfaces: eps, sigma out of range");
  require(std::fabs(v1.a - v2.a) <= eps + 1e-15 && std::fabs(v1.b - v2.b) <= eps + 1e-15,
          Err::PreconditionViolation, "order_nearby_surfaces: coefficient gap exceeds eps");
  const int d = v1.surface.tangent_dim();
  // Graph hypotheses on B_{2 sigma}: |grad h_i| <= 1 and |h1 - h2| <= eps sigma^2.
  {
    const int probes = 2 * cfg.lattice_per_axis;
    for (int i = 0; i <= probes; ++i) {
      Vec xp = Vec::zeros(d);
      if (d > 0) xp[0] = -2 * sigma + 4 * sigma * i / probes;
      if (d > 1 && i % 3 == 0) xp[1] = xp[0] * 0.5;
      require(v1.surface.grad_height(xp).norm() <= 1.0 && v2.surface.grad_height(xp).norm() <= 1.0,
              Err::PreconditionViolation, "order_nearby_surfaces: surface slope exceeds 1");
      double h2 = v2.surface.height(xp) + vertical_offset_2;
      require(std::fabs(v1.surface.height(xp) - h2) <= eps * sigma * sigma + 1e-15,
              Err::PreconditionViolation, "order_nearby_surfaces: surfaces separate beyond eps sigma^2");
    }
  }

  std::vector<Point> lattice;
  const int m = cfg.lattice_per_axis;
  auto axis_val = [&](int i) { return -sigma + 2.0 * sigma * i / (m - 1); };
  for (int i = 0; i < (d > 0 ? m : 1); ++i)
    for (int j = 0; j < (d > 1 ? m : 1); ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          Point p;
          p.xp = Vec::zeros(d);
          if (d > 0) p.xp[0] = axis_val(i);
          if (d > 1) p.xp[1] = axis_val(j);
          p.xn = axis_val(k);
          p.s = axis_val(l);
          if (p.norm() <= sigma) lattice.push_back(p);
        }

  for (double c = 0.0; c <= cfg.C_max + 1e-9; c += cfg.C_step) {
    double shift = c * eps * sigma * sigma;
    bool ok = true;
    for (const Point& p : lattice) {
      if (eval_V(v1, p) > eval_V(v2, p.shifted_en(shift - vertical_offset_2)) + cfg.compare_slack) {
        ok = false;
        break;
      }
    }
    if (ok) return shift;
  }
  fail(Err::AuditFailure, "order_nearby_surfaces: no shift <= C_max eps sigma^2 verifies");
}

}  // namespace thinfb
