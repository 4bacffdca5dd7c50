#pragma once
// The linearized problem Delta(U_n h) = 0 off the slit with |grad_r h| = 0
// on the edge, solved per 2D slice through the conformal reduction: with
// H~ = U_t h pushed to the half disk, Delta H~ = zeta f~ / sqrt(2), H~ = 0
// on {zeta = 0}. A direct solver (sine transform in the angle, tridiagonal
// in the radius) gives the discrete solution to round-off; Richardson over
// a half-step companion removes the leading discretization error.
//
// The trace of h on the circle determines h(0) through the edge condition:
// the raw Dirichlet solve H_A with a pinned origin splits as
// H_A = H_reg + h0 * zeta/sqrt(2), since U_t restricted to the unit circle
// equals zeta/sqrt(2) and its harmonic extension is exactly that linear
// function. The physical field is H~ = H_reg + h0 * U_t with the fitted
// zeta-linear coefficient of H_reg forced to zero, which is the edge
// condition in disguise; h = 1 maps to H~ = U_t exactly.

#include <fftw3.h>

#include "thinfb/conformal.hpp"
#include "thinfb/core.hpp"
#include "thinfb/barrier.hpp"

namespace thinfb {

/// Half-disk field on the polar grid r_i = i/nr (i = 0..nr), beta_j =
/// -pi/2 + j pi/nb (j = 0..nb). `values` holds the regular part; the
/// singular mode h0 * U_t is kept in closed form.
struct HalfDiskField {
  int nr = 0, nb = 0;
  std::vector<double> values;  // (nr+1) x (nb+1), row-major in (i, j)
  double h0 = 0;               // coefficient of the U_t mode
  double f0 = 0;               // forcing at the origin, if a forcing was given
  bool has_forcing = false;
  double solver_residual = 0;

  double dr() const { return 1.0 / nr; }
  double db() const { return M_PI / nb; }
  double r_of(int i) const { return static_cast<double>(i) / nr; }
  double beta_of(int j) const { return -0.5 * M_PI + j * db(); }
  double zeta_of(int i, int j) const { return r_of(i) * std::cos(beta_of(j)); }
  double y_of(int i, int j) const { return r_of(i) * std::sin(beta_of(j)); }
  double& at(int i, int j) { return values[static_cast<size_t>(i) * (nb + 1) + static_cast<size_t>(j)]; }
  double at(int i, int j) const {
    return values[static_cast<size_t>(i) * (nb + 1) + static_cast<size_t>(j)];
  }

  static HalfDiskField zeros(int nr, int nb) {
    HalfDiskField f;
    f.nr = nr;
    f.nb = nb;
    f.values.assign(static_cast<size_t>(nr + 1) * (nb + 1), 0.0);
    return f;
  }

  template <class F>
  static HalfDiskField sample(int nr, int nb, F&& fn, double h0 = 0.0) {
    HalfDiskField f = zeros(nr, nb);
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j <= nb; ++j) f.at(i, j) = fn(f.zeta_of(i, j), f.y_of(i, j));
    f.h0 = h0;
    return f;
  }

  /// Bilinear interpolation of the regular part in (r, beta); small radial
  /// overshoots from finite-difference probes clamp to the boundary ring.
  double interp_reg(double zeta, double y) const {
    double r = std::hypot(zeta, y), beta = std::atan2(y, zeta);
    require(r <= 1.0 + 2.0 * dr(), Err::PreconditionViolation, "HalfDiskField: point outside disk");
    r = std::min(r, 1.0);
    double qi = r * nr, qj = (beta + 0.5 * M_PI) / db();
    int i = std::clamp(static_cast<int>(qi), 0, nr - 1);
    int j = std::clamp(static_cast<int>(qj), 0, nb - 1);
    double wi = qi - i, wj = qj - j;
    return (1 - wi) * ((1 - wj) * at(i, j) + wj * at(i, j + 1)) +
           wi * ((1 - wj) * at(i + 1, j) + wj * at(i + 1, j + 1));
  }

  /// Full field H~ = H_reg + h0 U_t in half-plane coordinates.
  double total(double zeta, double y) const {
    double r2 = zeta * zeta + y * y;
    return interp_reg(zeta, y) + (r2 > 0 ? h0 * zeta / (std::sqrt(2.0) * r2) : 0.0);
  }
};

struct HalfDiskSolveOptions {
  int nr = 256;
  int nb = 0;          // 0: three angular nodes per radial step
  bool richardson = true;
  double tol = 1e-9;   // residual acceptance on the base grid, relative
};

namespace detail {

// Direct solve of Delta u = rhs on the half disk, u = 0 on {zeta = 0} and
// at the origin, u = circle_data at r = 1. rhs and data indexed like the
// field. Returns interior residual in Laplacian units.
inline double polar_poisson_direct(HalfDiskField& u, const std::vector<double>& rhs,
                                   const std::vector<double>& circle) {
  const int nr = u.nr, nb = u.nb;
  const int m = nb - 1;  // interior angular nodes
  const double dr = u.dr(), db = u.db();

  std::vector<double> buf_in(static_cast<size_t>(m)), buf_out(static_cast<size_t>(m));
  fftw_plan plan = fftw_plan_r2r_1d(m, buf_in.data(), buf_out.data(), FFTW_RODFT00, FFTW_ESTIMATE);

  // forward transform of rhs rows and of the circle data
  std::vector<double> rhat(static_cast<size_t>(nr + 1) * static_cast<size_t>(m), 0.0);
  for (int i = 1; i < nr; ++i) {
    for (int j = 1; j < nb; ++j) buf_in[static_cast<size_t>(j - 1)] = rhs[static_cast<size_t>(i) * (nb + 1) + j];
    fftw_execute(plan);
    for (int k = 0; k < m; ++k) rhat[static_cast<size_t>(i) * m + k] = buf_out[static_cast<size_t>(k)];
  }
  std::vector<double> chat(static_cast<size_t>(m));
  for (int j = 1; j < nb; ++j) buf_in[static_cast<size_t>(j - 1)] = circle[static_cast<size_t>(j)];
  fftw_execute(plan);
  for (int k = 0; k < m; ++k) chat[static_cast<size_t>(k)] = buf_out[static_cast<size_t>(k)];

  // per-mode tridiagonal solves over i = 1..nr-1
  std::vector<double> uhat(static_cast<size_t>(nr + 1) * static_cast<size_t>(m), 0.0);
  std::vector<double> diag(static_cast<size_t>(nr - 1)), upper(static_cast<size_t>(nr - 1)),
      lower(static_cast<size_t>(nr - 1)), rr(static_cast<size_t>(nr - 1));
  for (int k = 0; k < m; ++k) {
    int mode = k + 1;
    double mu = 2.0 * std::cos(mode * M_PI / nb) - 2.0;
    for (int i = 1; i < nr; ++i) {
      double r = u.r_of(i);
      lower[static_cast<size_t>(i - 1)] = 1.0 / (dr * dr) - 1.0 / (2.0 * dr * r);
      upper[static_cast<size_t>(i - 1)] = 1.0 / (dr * dr) + 1.0 / (2.0 * dr * r);
      diag[static_cast<size_t>(i - 1)] = -2.0 / (dr * dr) + mu / (r * r * db * db);
      rr[static_cast<size_t>(i - 1)] = rhat[static_cast<size_t>(i) * m + k];
    }
    rr[static_cast<size_t>(nr - 2)] -= upper[static_cast<size_t>(nr - 2)] * chat[static_cast<size_t>(k)];
    // Thomas
    for (int i = 1; i < nr - 1; ++i) {
      double f = lower[static_cast<size_t>(i)] / diag[static_cast<size_t>(i - 1)];
      diag[static_cast<size_t>(i)] -= f * upper[static_cast<size_t>(i - 1)];
      rr[static_cast<size_t>(i)] -= f * rr[static_cast<size_t>(i - 1)];
    }
    uhat[static_cast<size_t>(nr - 1) * m + k] = rr[static_cast<size_t>(nr - 2)] / diag[static_cast<size_t>(nr - 2)];
    for (int i = nr - 2; i >= 1; --i)
      uhat[static_cast<size_t>(i) * m + k] =
          (rr[static_cast<size_t>(i - 1)] -
           upper[static_cast<size_t>(i - 1)] * uhat[static_cast<size_t>(i + 1) * m + k]) /
          diag[static_cast<size_t>(i - 1)];
  }

  // inverse transform rows (RODFT00 twice scales by 2 nb)
  const double scale = 1.0 / (2.0 * nb);
  for (int i = 1; i < nr; ++i) {
    for (int k = 0; k < m; ++k) buf_in[static_cast<size_t>(k)] = uhat[static_cast<size_t>(i) * m + k];
    fftw_execute(plan);
    for (int j = 1; j < nb; ++j) u.at(i, j) = buf_out[static_cast<size_t>(j - 1)] * scale;
  }
  for (int j = 0; j <= nb; ++j) u.at(nr, j) = circle[static_cast<size_t>(j)];
  fftw_destroy_plan(plan);

  // interior residual
  double res = 0;
  for (int i = 1; i < nr; ++i) {
    double r = u.r_of(i);
    for (int j = 1; j < nb; ++j) {
      double lap = (u.at(i + 1, j) - 2 * u.at(i, j) + u.at(i - 1, j)) / (dr * dr) +
                   (u.at(i + 1, j) - u.at(i - 1, j)) / (2 * dr * r) +
                   (u.at(i, j + 1) - 2 * u.at(i, j) + u.at(i, j - 1)) / (r * r * db * db);
      res = std::max(res, std::fabs(lap - rhs[static_cast<size_t>(i) * (nb + 1) + j]));
    }
  }
  return res;
}

struct AnnulusFit {
  double d0 = 0, d1 = 0, d2 = 0;
  double rms = 0;
};

}  // namespace detail

struct ExpansionFitOptions {
  double r_lo = 0.05;
  double r_hi = 0.20;
};

/// Weighted least squares of the odd-in-zeta model
/// H ~ d0 zeta + d1 zeta^3 + d2 zeta y^2 over the annulus, weight 1/r.
inline detail::AnnulusFit fit_d_coefficients(const HalfDiskField& f,
                                             const ExpansionFitOptions& opt = {}) {
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs, w;
  for (int i = 0; i <= f.nr; ++i) {
    double r = f.r_of(i);
    if (r < opt.r_lo || r > opt.r_hi) continue;
    for (int j = 0; j <= f.nb; ++j) {
      double z = f.zeta_of(i, j), y = f.y_of(i, j);
      rows.push_back({z, z * z * z, z * y * y});
      rhs.push_back(f.at(i, j));
      w.push_back(1.0 / r);
    }
  }
  require(rows.size() > 16, Err::PoorFit, "fit_d_coefficients: annulus contains too few nodes");
  LsqFit fit = lsq(rows, rhs, &w);
  return {fit.coef[0], fit.coef[1], fit.coef[2], fit.rms_residual};
}

/// Solves the conformally reduced slice problem. h_data is the trace of h
/// evaluated in slit-plane coordinates on the circle rho = 1/2; forcing may
/// be null for the homogeneous problem.
template <class HData, class Forcing>
HalfDiskField solve_linearized_2d(const HData& h_data, const Forcing* forcing,
                                  const HalfDiskSolveOptions& opt = {}) {
  auto assemble_and_solve = [&](int nr, int nb) {
    HalfDiskField u = HalfDiskField::zeros(nr, nb);
    std::vector<double> rhs(static_cast<size_t>(nr + 1) * (nb + 1), 0.0);
    if (forcing != nullptr) {
      const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
      for (int i = 1; i < nr; ++i)
        for (int j = 1; j < nb; ++j) {
          double z = u.zeta_of(i, j), y = u.y_of(i, j);
          SlitPlanePoint p = conformal_pull(z, y);
          rhs[static_cast<size_t>(i) * (nb + 1) + j] = z * (*forcing)(p.t, p.s) * inv_sqrt2;
        }
    }
    std::vector<double> circle(static_cast<size_t>(nb + 1), 0.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int j = 1; j < nb; ++j) {
      double z = u.zeta_of(nr, j), y = u.y_of(nr, j);
      SlitPlanePoint p = conformal_pull(z, y);
      double hb = h_data(p.t, p.s);
      require(std::isfinite(hb), Err::TraceViolation, "solve_linearized_2d: boundary trace not finite");
      circle[static_cast<size_t>(j)] = z * inv_sqrt2 * hb;  // U_t h on the unit circle
    }
    u.solver_residual = detail::polar_poisson_direct(u, rhs, circle);
    return u;
  };

  int nr = opt.nr;
  int nb = opt.nb > 0 ? opt.nb : 3 * nr;
  HalfDiskField coarse = assemble_and_solve(nr, nb);
  double scale = 0;
  for (double v : coarse.values) scale = std::max(scale, std::fabs(v));
  double fp_floor = 1024.0 * std::numeric_limits<double>::epsilon() / (coarse.dr() * coarse.dr());
  require(coarse.solver_residual <= std::max(opt.tol, fp_floor) * std::max(scale, 1.0),
          Err::NoConvergence, "solve_linearized_2d: residual above tolerance");

  if (opt.richardson) {
    HalfDiskField fine = assemble_and_solve(2 * nr, 2 * nb);
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j <= nb; ++j)
        coarse.at(i, j) = (4.0 * fine.at(2 * i, 2 * j) - coarse.at(i, j)) / 3.0;
  }

  // split off the U_t mode: the raw zeta-linear coefficient is h0/sqrt(2)
  detail::AnnulusFit fit = fit_d_coefficients(coarse);
  coarse.h0 = std::sqrt(2.0) * fit.d0;
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int i = 0; i <= coarse.nr; ++i)
    for (int j = 0; j <= coarse.nb; ++j)
      coarse.at(i, j) -= coarse.h0 * inv_sqrt2 * coarse.zeta_of(i, j);
  if (forcing != nullptr) {
    coarse.f0 = (*forcing)(0.0, 0.0);
    coarse.has_forcing = true;
  }
  return coarse;
}

struct NoForcing {
  double operator()(double, double) const { return 0.0; }
};

template <class HData>
HalfDiskField solve_linearized_2d(const HData& h_data, const HalfDiskSolveOptions& opt = {}) {
  return solve_linearized_2d(h_data, static_cast<const NoForcing*>(nullptr), opt);
}

/// Expansion data of one 2D slice. The d coefficients parameterize
/// H_reg = zeta (d0 + d1 zeta^2 + d2 y^2 + O(r^4)); the slit-plane
/// expansion h = h0 - a/2 rho^2 - b t rho + O(rho^3) follows from
/// a = -4 sqrt(2) (d1 + d2), b = -2 sqrt(2) (d1 - d2).
struct Expansion2D {
  double h0 = 0;
  double a = 0;
  double b = 0;
  double d0 = 0, d1 = 0, d2 = 0;
  double fit_rms = 0;
  double edge_defect_ratio = 0;   // |d0| / (10 x rms), > 1 flags a bad field
  double consistency_defect = 0;  // |6 d1 + 2 d2 - f(0)/sqrt(2)| when forced
};

struct EdgeAuditOptions {
  double rejection_factor = 10.0;
  double rms_floor = 1e-14;
};

inline Expansion2D extract_expansion(const HalfDiskField& f, const ExpansionFitOptions& fit_opt = {},
                                     const EdgeAuditOptions& audit = {}) {
  detail::AnnulusFit fit = fit_d_coefficients(f, fit_opt);
  Expansion2D e;
  e.h0 = f.h0;
  e.d0 = fit.d0;
  e.d1 = fit.d1;
  e.d2 = fit.d2;
  e.fit_rms = fit.rms;
  const double s2 = std::sqrt(2.0);
  e.a = -4.0 * s2 * (fit.d1 + fit.d2);
  e.b = -2.0 * s2 * (fit.d1 - fit.d2);
  e.edge_defect_ratio =
      std::fabs(fit.d0) / (audit.rejection_factor * std::max(fit.rms, audit.rms_floor));
  if (f.has_forcing) e.consistency_defect = std::fabs(6 * fit.d1 + 2 * fit.d2 - f.f0 / s2);
  return e;
}

/// |grad_r h| = 0 audit: a field claiming to solve the slice problem must
/// carry no zeta-linear content in its regular part beyond fit noise.
inline bool edge_condition_audit(const HalfDiskField& f, const ExpansionFitOptions& fit_opt = {},
                                 const EdgeAuditOptions& audit = {}) {
  return extract_expansion(f, fit_opt, audit).edge_defect_ratio <= 1.0;
}

/// zeta^{-1} H_reg on the polar grid: direct division away from {zeta = 0},
/// the integral of the zeta-derivative along the horizontal segment near it.
inline HalfDiskField strip_zeta(const HalfDiskField& f, double zeta_cut_cells = 4.0) {
  // trace check on the {zeta = 0} boundary rays
  for (int i = 0; i <= f.nr; ++i) {
    double edge = std::max(std::fabs(f.at(i, 0)), std::fabs(f.at(i, f.nb)));
    require(edge <= 1e-8 * std::max(1.0, f.r_of(i)), Err::TraceViolation,
            "strip_zeta: field does not vanish on {zeta=0}");
  }
  const double cut = zeta_cut_cells * f.dr();
  HalfDiskField out = HalfDiskField::zeros(f.nr, f.nb);
  const double fd = 0.25 * f.dr();
  for (int i = 0; i <= f.nr; ++i) {
    for (int j = 0; j <= f.nb; ++j) {
      double z = f.zeta_of(i, j), y = f.y_of(i, j);
      if (z > cut) {
        out.at(i, j) = f.at(i, j) / z;
        continue;
      }
      if (std::hypot(z, y) < 4 * fd) {
        out.at(i, j) = 0;  // origin: filled by the d0 content, zero after splitting
        continue;
      }
      // int_0^1 dH/dzeta (tau z, y) dtau, Simpson on 17 points
      const int nq = 16;
      double acc = 0;
      for (int q = 0; q <= nq; ++q) {
        double tau = static_cast<double>(q) / nq;
        double zz = tau * z;
        double zp = std::min(zz + fd, 1.0), zm = std::max(zz - fd, 0.0);
        double dz = (f.interp_reg(zp, y) - f.interp_reg(zm, y)) / (zp - zm);
        double wq = (q == 0 || q == nq) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
        acc += wq * dz;
      }
      out.at(i, j) = acc / (3.0 * nq);
    }
  }
  out.h0 = f.h0;
  return out;
}

/// Slit-plane evaluation of h from a solved slice: h = sqrt(2) r^2 / zeta *
/// H_reg + h0, with the strip-zeta quadrature taking over near the slit.
inline double recover_h(const HalfDiskField& f, double t, double s) {
  HalfPlanePoint w = conformal_push(t, s);
  double r2 = w.zeta * w.zeta + w.y * w.y;
  require(r2 <= 1.0 + 1e-12, Err::PreconditionViolation, "recover_h: point outside the half disk");
  const double s2 = std::sqrt(2.0);
  if (w.zeta > 4.0 * f.dr()) return s2 * r2 * f.interp_reg(w.zeta, w.y) / w.zeta + f.h0;
  // near the slit, integrate the derivative as in strip_zeta
  const int nq = 16;
  const double fd = 0.25 * f.dr();
  double acc = 0;
  for (int q = 0; q <= nq; ++q) {
    double tau = static_cast<double>(q) / nq;
    double zz = tau * w.zeta;
    double zp = std::min(zz + fd, 1.0), zm = std::max(zz - fd, 0.0);
    double dz = (f.interp_reg(zp, w.y) - f.interp_reg(zm, w.y)) / (zp - zm);
    double wq = (q == 0 || q == nq) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
    acc += wq * dz;
  }
  return s2 * r2 * (acc / (3.0 * nq)) + f.h0;
}

/// Full expansion over x' slices (n = 2): five slice solves at
/// x1 in {0, +-dx, +-2dx} and fourth-order central differences in x'.
struct ExpansionCoeffs {
  double h0 = 0;
  Vec xi0;
  SymMat M0;
  double a0 = 0;
  double b0 = 0;
  double residual = 0;
  double constraint_defect() const { return std::fabs(a0 + b0 - M0.trace()); }
};

inline ExpansionCoeffs combine_slices(const std::array<Expansion2D, 5>& slice, double dx) {
  // slices ordered x1 = -2dx, -dx, 0, +dx, +2dx
  ExpansionCoeffs c;
  c.h0 = slice[2].h0;
  c.xi0 = Vec::zeros(1);
  c.M0 = SymMat::zeros(1);
  c.xi0[0] = (-slice[4].h0 + 8 * slice[3].h0 - 8 * slice[1].h0 + slice[0].h0) / (12 * dx);
  c.M0.at(0, 0) = (-slice[4].h0 + 16 * slice[3].h0 - 30 * slice[2].h0 + 16 * slice[1].h0 -
                   slice[0].h0) /
                  (12 * dx * dx);
  c.a0 = slice[2].a;
  c.b0 = slice[2].b;
  for (const auto& s : slice) c.residual = std::max(c.residual, s.fit_rms);
  return c;
}

}  // namespace thinfb
