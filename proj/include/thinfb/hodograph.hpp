#pragma once
// The change of variables g -> g~ defined by U(X) = g(X - w e_n), its
// inverse phi -> phi_eps, trapping-width (flatness) measurement, and the
// ordering-transfer audit. The transform is multivalued in general; each
// node carries the interval [w_min, w_max] of admissible displacements and
// metrics collapse it to the midpoint.

#include "thinfb/grid.hpp"

namespace thinfb {

struct WInterval {
  double w_min = 0;
  double w_max = 0;
  double mid() const { return 0.5 * (w_min + w_max); }
  double width() const { return w_max - w_min; }
};

struct HodographOptions {
  double eps_bound = 0.5;   // root bracket half-width
  double root_tol = 1e-10;
  int scan_subdivisions = 24;
};

/// Displacement interval at one point: all w in [-eps_bound, eps_bound] with
/// g(X - w e_n) = U(X). Throws NotFlat when no root exists in the bracket.
template <class G>
WInterval hodograph_at(const G& g, const Point& x, const HodographOptions& opt = {}) {
  const double target = eval_U(x.xn, x.s);
  auto f = [&](double w) { return g(x.shifted_en(-w)) - target; };

  const int k = opt.scan_subdivisions;
  double lo = -opt.eps_bound, step = 2.0 * opt.eps_bound / k;
  double prev = f(lo);
  bool found = false;
  WInterval out{1e300, -1e300};
  auto note_root = [&](double w) {
    out.w_min = std::min(out.w_min, w);
    out.w_max = std::max(out.w_max, w);
    found = true;
  };
  for (int i = 0; i < k; ++i) {
    double a = lo + i * step, b = a + step;
    double fa = prev;
    double fb = f(b);
    if (fa == 0.0) note_root(a);
    if (fb == 0.0 && i == k - 1) note_root(b);
    if (fa * fb < 0) {
      double xa = a, xb = b, va = fa;
      for (int it = 0; it < 64 && xb - xa > opt.root_tol; ++it) {
        double m = 0.5 * (xa + xb), vm = f(m);
        if (vm == 0.0) {
          xa = xb = m;
          break;
        }
        if (va * vm < 0)
          xb = m;
        else {
          xa = m;
          va = vm;
        }
      }
      note_root(0.5 * (xa + xb));
    }
    prev = fb;
  }
  require(found, Err::NotFlat, "hodograph_at: no displacement root in the bracket");
  return out;
}

struct HodographNode {
  std::array<int, 3> iv;
  Point x;
  WInterval w;
};

struct HodographField {
  Grid grid;
  Point center;
  double radius = 0;
  std::vector<HodographNode> nodes;

  /// Conservative oscillation over nodes within dist of the center
  /// (endpoint-based; the multivalued set is treated as a whole).
  double oscillation(double within_radius) const {
    double lo = 1e300, hi = -1e300;
    for (const auto& n : nodes) {
      Point d = n.x;
      for (int k = 0; k < d.xp.size(); ++k) d.xp[k] -= center.xp[k];
      d.xn -= center.xn;
      d.s -= center.s;
      if (d.norm() > within_radius) continue;
      lo = std::min(lo, n.w.w_min);
      hi = std::max(hi, n.w.w_max);
    }
    require(hi >= lo, Err::InsufficientScales, "oscillation: no node in radius");
    return hi - lo;
  }

  double max_width() const {
    double w = 0;
    for (const auto& n : nodes) w = std::max(w, n.w.width());
    return w;
  }

  void export_csv(const std::string& path) const {
    std::ofstream f(path);
    require(f.good(), Err::IoError, "HodographField: cannot open " + path);
    f << "# x'..., x_n, s, w_min, w_max\n";
    char buf[160];
    for (const auto& n : nodes) {
      std::string line;
      for (int k = 0; k < n.x.xp.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,", n.x.xp[k]);
        line += buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", n.x.xn, n.x.s, n.w.w_min,
                    n.w.w_max);
      line += buf;
      f << line;
    }
  }
};

/// g~ on the grid nodes of the ball minus P. The evaluator g must be defined
/// on the ball fattened by eps_bound in the e_n direction.
template <class G>
HodographField compute_hodograph(const G& g, const Grid& grid, const Point& center, double radius,
                                 const HodographOptions& opt = {}) {
  HodographField out;
  out.grid = grid;
  out.center = center;
  out.radius = radius;
  grid.for_each([&](const std::array<int, 3>& iv) {
    Point x = grid.point(iv);
    if (in_P(x)) return;
    Point d = x;
    for (int k = 0; k < d.xp.size(); ++k) d.xp[k] -= center.xp[k];
    d.xn -= center.xn;
    d.s -= center.s;
    if (d.norm() > radius) return;
    out.nodes.push_back({iv, x, hodograph_at(g, x, opt)});
  });
  require(!out.nodes.empty(), Err::PreconditionViolation, "compute_hodograph: empty region");
  return out;
}

inline HodographField compute_hodograph(const GridFunction& g, const Point& center, double radius,
                                        const HodographOptions& opt = {}) {
  return compute_hodograph([&](const Point& p) { return g.interp_en(p); }, g.grid, center, radius,
                           opt);
}

/// Solves x_n - eps phi(x) = y for x_n along the e_n line through Y and
/// returns U at the preimage: the unique phi_eps with (phi_eps)~ = eps phi.
template <class Phi>
double inverse_hodograph_eval(const Phi& phi, double eps, const Point& y, double root_tol = 1e-12) {
  auto q = [&](double xn) {
    Point p = y;
    p.xn = xn;
    return xn - eps * phi(p) - y.xn;
  };
  // expand a bracket around y.xn
  double half = std::max(1e-6, 2.0 * std::fabs(eps));
  double a = y.xn - half, b = y.xn + half;
  for (int grow = 0; grow < 40 && q(a) > 0; ++grow) a -= half;
  for (int grow = 0; grow < 40 && q(b) < 0; ++grow) b += half;
  require(q(a) <= 0 && q(b) >= 0, Err::NonInjective,
          "inverse_hodograph: no bracket for the displacement equation");
  for (int it = 0; it < 100 && b - a > root_tol; ++it) {
    double m = 0.5 * (a + b);
    if (q(m) < 0)
      a = m;
    else
      b = m;
  }
  double xn = 0.5 * (a + b);
  return eval_U(xn, y.s);
}

/// Grid version of the inverse transform. Checks injectivity of the
/// displacement map along every e_n line at node resolution.
template <class Phi>
GridFunction inverse_hodograph(const Phi& phi, double eps, const Grid& grid,
                               double root_tol = 1e-12) {
  // injectivity scan: x_n -> x_n - eps phi must be increasing at node spacing
  grid.for_each([&](const std::array<int, 3>& iv) {
    if (iv[static_cast<size_t>(grid.n - 1)] + 1 >= grid.count[static_cast<size_t>(grid.n - 1)]) return;
    Point x = grid.point(iv);
    Point xr = x;
    xr.xn += grid.h;
    double q0 = x.xn - eps * phi(x);
    double q1 = xr.xn - eps * phi(xr);
    require(q1 > q0, Err::NonInjective, "inverse_hodograph: displacement map folds on the grid");
  });
  return GridFunction::sample(grid,
                              [&](const Point& y) { return inverse_hodograph_eval(phi, eps, y, root_tol); });
}

struct FlatnessReport {
  Point center;
  double radius = 0;
  double eps = 0;      // smallest verified trapping width
  int direction_axis;  // e_n
  long nodes_checked = 0;
};

struct FlatnessOptions {
  double eps_max = 0.5;
  double tol = 1e-8;
};

/// Smallest eps with U(X - eps e_n) <= g(X) <= U(X + eps e_n) at every ball
/// node, found by bisection. NeverFlat if trapping fails at eps_max.
template <class G>
FlatnessReport measure_flatness(const G& g, const Grid& grid, const Point& center, double radius,
                                const FlatnessOptions& opt = {}) {
  std::vector<Point> pts;
  grid.for_each([&](const std::array<int, 3>& iv) {
    Point x = grid.point(iv);
    Point d = x;
    for (int k = 0; k < d.xp.size(); ++k) d.xp[k] -= center.xp[k];
    d.xn -= center.xn;
    d.s -= center.s;
    if (d.norm() <= radius) pts.push_back(x);
  });
  require(!pts.empty(), Err::PreconditionViolation, "measure_flatness: empty ball");

  auto trapped = [&](double eps) {
    for (const Point& x : pts) {
      double gx = g(x);
      if (gx < eval_U(x.xn - eps, x.s) || gx > eval_U(x.xn + eps, x.s)) return false;
    }
    return true;
  };

  FlatnessReport rep;
  rep.center = center;
  rep.radius = radius;
  rep.direction_axis = grid.n - 1;
  rep.nodes_checked = static_cast<long>(pts.size());
  require(trapped(opt.eps_max), Err::NeverFlat, "measure_flatness: not trapped at eps_max");
  double lo = 0, hi = opt.eps_max;
  if (trapped(0.0)) {
    rep.eps = 0.0;
    return rep;
  }
  while (hi - lo > opt.tol) {
    double mid = 0.5 * (lo + hi);
    if (trapped(mid))
      hi = mid;
    else
      lo = mid;
  }
  rep.eps = hi;
  return rep;
}

inline FlatnessReport measure_flatness(const GridFunction& g, const Point& center, double radius,
                                       const FlatnessOptions& opt = {}) {
  return measure_flatness([&](const Point& x) { return g.interp_en(x); }, g.grid, center, radius,
                          opt);
}

/// Lemma 2.6 audit over a concrete pair: both implications checked on grid
/// nodes through collapsed (midpoint) transforms with root-tolerance slack.
template <class V, class G>
bool ordering_transfer_check(const V& v, const G& g, const Grid& grid, double lambda, double eps,
                             const HodographOptions& opt = {}) {
  HodographOptions o = opt;
  o.eps_bound = std::max(o.eps_bound, 2 * eps);
  double slack = 10 * o.root_tol;

  bool v_le_g = true;
  grid.for_each([&](const std::array<int, 3>& iv) {
    Point x = grid.point(iv);
    if (x.norm() > lambda) return;
    if (v(x) > g(x) + slack) v_le_g = false;
  });

  HodographField tv = compute_hodograph(v, grid, Point::make(Vec::zeros(grid.n - 1), 0, 0),
                                        lambda - eps, o);
  HodographField tg = compute_hodograph(g, grid, Point::make(Vec::zeros(grid.n - 1), 0, 0),
                                        lambda - eps, o);
  require(tv.nodes.size() == tg.nodes.size(), Err::PreconditionViolation,
          "ordering_transfer_check: region mismatch");

  bool tv_le_tg = true;
  for (size_t i = 0; i < tv.nodes.size(); ++i)
    if (tv.nodes[i].w.mid() > tg.nodes[i].w.mid() + slack) tv_le_tg = false;

  // forward: v <= g on B_lambda  =>  v~ <= g~ on B_{lambda-eps} \ P
  if (v_le_g && !tv_le_tg) return false;

  // converse: v~ <= g~ on B_sigma \ P  =>  v <= g on B_{sigma-eps}
  double sigma = lambda - eps;
  bool inner_ok = true;
  grid.for_each([&](const std::array<int, 3>& iv) {
    Point x = grid.point(iv);
    if (x.norm() > sigma - eps) return;
    if (v(x) > g(x) + slack) inner_ok = false;
  });
  if (tv_le_tg && !inner_ok) return false;
  return true;
}

}  // namespace thinfb
