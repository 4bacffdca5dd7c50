#pragma once
// Finite-difference Laplace solver on box grids minus a pinned set on the
// {s=0} plane. Even reflection across s=0 enters through the stencil (the
// ghost value below the plane equals the value above). Red-black SOR with
// per-grid tuned omega; sweeps parallelize over same-color nodes.

#include <atomic>
#include <limits>
#include <cstdlib>
#include <thread>

#include "thinfb/grid.hpp"

namespace thinfb {

inline int worker_threads() {
  static int cached = [] {
    if (const char* env = std::getenv("THINFB_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return cached;
}

/// Static partition of [0, count) across the worker threads; the work split
/// is index-based, so results do not depend on scheduling.
template <class F>
void parallel_for(long count, F&& fn) {
  int threads = std::min<long>(worker_threads(), count);
  if (threads <= 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  long chunk = (count + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    long begin = t * chunk, end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (long i = begin; i < end; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct SorOptions {
  double tol = 1e-10;        // on the FD-Laplacian residual, relative to data scale
  long max_sweeps = 1000000;
  double omega = 0.0;        // 0: tune from the largest axis count
  int check_every = 25;
};

struct SorStats {
  long sweeps = 0;
  double residual = 0.0;  // max FD-Laplacian residual at free nodes
};

// A locally adapted stencil near a slit tip: weights chosen so the discrete
// operator annihilates the singular harmonic U centered at the tip (plus
// constants and linears) instead of plain quadratics. Plain 5/7-point
// pinning leaves an O(h) pollution along the plane; tip adaptation restores
// second order away from the tip.
struct TipStencil {
  long center = 0;
  std::array<long, 4> nbr{};
  std::array<double, 4> w{};
  double wc = 0;
  int n_nbr = 0;
};

/// The assembled discrete operator: free-node classification plus adapted
/// stencils near slit tips (n = 1 only; the n = 2 edge is a curve and keeps
/// the plain scheme). The adapted nodes form a small dense block solved
/// exactly once per sweep; relaxation alone stalls on modes trapped there.
struct SlitOperator {
  Grid grid;
  std::vector<uint8_t> free;
  std::vector<int32_t> tip_of;      // -1, or position in the adapted block
  std::vector<TipStencil> tips;
  DenseLU block_lu;
  std::vector<std::vector<std::pair<long, double>>> block_outside;  // per row couplings
};

struct TipOptions {
  bool correct = true;
  double radius = 0.1;
};

namespace detail {

inline void build_tip_stencils(SlitOperator& op, const std::vector<uint8_t>& positive_plane,
                               const TipOptions& topt) {
  const Grid& g = op.grid;
  if (!topt.correct || g.n != 1) return;
  const int c0 = g.count[0];
  const long sn = g.stride(1);

  // tips: pinned plane nodes with a free plane neighbor, oriented toward it
  std::vector<std::pair<double, int>> tips_x;  // (x_n of tip, orientation)
  for (int i = 1; i + 1 < c0; ++i) {
    if (positive_plane[static_cast<size_t>(i)]) continue;
    bool right = positive_plane[static_cast<size_t>(i + 1)] != 0;
    bool left = positive_plane[static_cast<size_t>(i - 1)] != 0;
    if (right == left) continue;  // isolated or interior pinned node
    tips_x.emplace_back(g.coord(0, i), right ? 1 : -1);
  }
  if (tips_x.empty()) return;

  const int cs = g.count[1];
  for (int is = 0; is < cs; ++is) {
    for (int i0 = 0; i0 < c0; ++i0) {
      long idx = is * sn + i0;
      if (!op.free[static_cast<size_t>(idx)]) continue;
      double x = g.coord(0, i0), s = g.coord(1, is);
      double best = 1e300, second = 1e300;
      double tip_x = 0;
      int orient = 1;
      for (auto [tx, sg] : tips_x) {
        double d = std::hypot(x - tx, s);
        if (d < best) {
          second = best;
          best = d;
          tip_x = tx;
          orient = sg;
        } else {
          second = std::min(second, d);
        }
      }
      double radius = std::min(topt.radius, 0.45 * second);
      if (best > radius) continue;

      auto mode = [&](double px, double ps) { return eval_U(orient * (px - tip_x), ps); };
      double h = g.h;
      TipStencil st;
      st.center = idx;
      bool ok = true;
      if (is == 0) {
        // plane node: E, W and the doubled reflected pair at s = h
        st.n_nbr = 3;
        st.nbr = {idx + 1, idx - 1, idx + sn, 0};
        // unknowns (wc, wE, wW, wN); rows: const, dx, dx^2+ds^2, mode
        std::vector<double> A{1, 1, 1, 1,
                              0, h, -h, 0,
                              0, h * h, h * h, h * h,
                              mode(x, 0), mode(x + h, 0), mode(x - h, 0), mode(x, h)};
        std::vector<double> rhs{0, 0, 4 * h * h, 0};
        try {
          std::vector<double> w = solve_dense(std::move(A), std::move(rhs));
          st.wc = w[0];
          st.w = {w[1], w[2], w[3], 0};
        } catch (const Error&) {
          ok = false;
        }
      } else {
        st.n_nbr = 4;
        st.nbr = {idx + 1, idx - 1, idx + sn, idx - sn};
        std::vector<double> A{1, 1, 1, 1, 1,
                              0, h, -h, 0, 0,
                              0, 0, 0, h, -h,
                              0, h * h, h * h, h * h, h * h,
                              mode(x, s), mode(x + h, s), mode(x - h, s), mode(x, s + h),
                              mode(x, s - h)};
        std::vector<double> rhs{0, 0, 0, 4 * h * h, 0};
        try {
          std::vector<double> w = solve_dense(std::move(A), std::move(rhs));
          st.wc = w[0];
          st.w = {w[1], w[2], w[3], w[4]};
        } catch (const Error&) {
          ok = false;
        }
      }
      if (!ok || std::fabs(st.wc) < 0.5) continue;  // keep the plain stencil when degenerate
      op.tip_of[static_cast<size_t>(idx)] = static_cast<int32_t>(op.tips.size());
      op.tips.push_back(st);
    }
  }

  // dense block over the adapted nodes
  const int m = static_cast<int>(op.tips.size());
  if (m == 0) return;
  std::vector<double> a(static_cast<size_t>(m) * static_cast<size_t>(m), 0.0);
  op.block_outside.assign(static_cast<size_t>(m), {});
  for (int r = 0; r < m; ++r) {
    const TipStencil& st = op.tips[static_cast<size_t>(r)];
    a[static_cast<size_t>(r) * m + static_cast<size_t>(r)] = st.wc;
    for (int k = 0; k < st.n_nbr; ++k) {
      long nbr = st.nbr[static_cast<size_t>(k)];
      int32_t pos = op.tip_of[static_cast<size_t>(nbr)];
      if (pos >= 0)
        a[static_cast<size_t>(r) * m + static_cast<size_t>(pos)] += st.w[static_cast<size_t>(k)];
      else
        op.block_outside[static_cast<size_t>(r)].emplace_back(nbr, st.w[static_cast<size_t>(k)]);
    }
  }
  op.block_lu = DenseLU(std::move(a), m);
}

inline void block_solve(const SlitOperator& op, std::vector<double>& u, std::vector<double>& rhs,
                        std::vector<double>& x) {
  const int m = static_cast<int>(op.tips.size());
  rhs.assign(static_cast<size_t>(m), 0.0);
  for (int r = 0; r < m; ++r) {
    double s = 0;
    for (auto [nbr, w] : op.block_outside[static_cast<size_t>(r)])
      s -= w * u[static_cast<size_t>(nbr)];
    rhs[static_cast<size_t>(r)] = s;
  }
  op.block_lu.solve(rhs, x);
  for (int r = 0; r < m; ++r)
    u[static_cast<size_t>(op.tips[static_cast<size_t>(r)].center)] = x[static_cast<size_t>(r)];
}

// One red-black colored sweep. free[idx] == 1 marks unknowns; all other
// nodes act as Dirichlet values. Free nodes never sit on the outer boundary,
// so neighbor indices stay in range; the s=0 plane reflects.
inline void sor_sweep_color(const SlitOperator& op, std::vector<double>& u, double omega,
                            int color) {
  const Grid& g = op.grid;
  const int n = g.n;
  const long sn = g.stride(n);       // s stride == plane size
  const int c0 = g.count[0];
  const int c1 = n == 2 ? g.count[1] : 1;
  const int cs = g.count[static_cast<size_t>(n)];
  const double inv_diag = 1.0 / (2.0 * (n + 1));
  const long s1 = n == 2 ? g.stride(1) : 0;
  const bool tips = !op.tips.empty();

  parallel_for(cs, [&](long is) {
    for (int i1 = 0; i1 < c1; ++i1) {
      long row = is * sn + (n == 2 ? i1 * s1 : 0);
      int start = static_cast<int>((color + (n == 2 ? i1 : 0) + is) & 1);
      for (int i0 = start; i0 < c0; i0 += 2) {
        long idx = row + i0;
        if (!op.free[static_cast<size_t>(idx)]) continue;
        if (tips && op.tip_of[static_cast<size_t>(idx)] >= 0) continue;  // block-solved
        double sum = u[static_cast<size_t>(idx - 1)] + u[static_cast<size_t>(idx + 1)];
        if (n == 2) sum += u[static_cast<size_t>(idx - s1)] + u[static_cast<size_t>(idx + s1)];
        if (is == 0)
          sum += 2.0 * u[static_cast<size_t>(idx + sn)];
        else
          sum += u[static_cast<size_t>(idx - sn)] + u[static_cast<size_t>(idx + sn)];
        double v = u[static_cast<size_t>(idx)];
        u[static_cast<size_t>(idx)] = v + omega * (sum * inv_diag - v);
      }
    }
  });
}

inline double max_residual(const SlitOperator& op, const std::vector<double>& u) {
  const Grid& g = op.grid;
  const int n = g.n;
  const long sn = g.stride(n);
  const long s1 = n == 2 ? g.stride(1) : 0;
  const int c0 = g.count[0];
  const int c1 = n == 2 ? g.count[1] : 1;
  const int cs = g.count[static_cast<size_t>(n)];
  const double inv_h2 = 1.0 / (g.h * g.h);
  const double diag = 2.0 * (n + 1);
  const bool tips = !op.tips.empty();

  std::vector<double> worst(static_cast<size_t>(cs), 0.0);
  parallel_for(cs, [&](long is) {
    double w = 0;
    for (int i1 = 0; i1 < c1; ++i1) {
      long row = is * sn + (n == 2 ? i1 * s1 : 0);
      for (int i0 = 0; i0 < c0; ++i0) {
        long idx = row + i0;
        if (!op.free[static_cast<size_t>(idx)]) continue;
        if (tips && op.tip_of[static_cast<size_t>(idx)] >= 0) {
          const TipStencil& st = op.tips[static_cast<size_t>(op.tip_of[static_cast<size_t>(idx)])];
          double sum = st.wc * u[static_cast<size_t>(idx)];
          for (int k = 0; k < st.n_nbr; ++k)
            sum += st.w[static_cast<size_t>(k)] * u[static_cast<size_t>(st.nbr[static_cast<size_t>(k)])];
          w = std::max(w, std::fabs(sum) * inv_h2);
          continue;
        }
        double sum = u[static_cast<size_t>(idx - 1)] + u[static_cast<size_t>(idx + 1)];
        if (n == 2) sum += u[static_cast<size_t>(idx - s1)] + u[static_cast<size_t>(idx + s1)];
        if (is == 0)
          sum += 2.0 * u[static_cast<size_t>(idx + sn)];
        else
          sum += u[static_cast<size_t>(idx - sn)] + u[static_cast<size_t>(idx + sn)];
        w = std::max(w, std::fabs(sum - diag * u[static_cast<size_t>(idx)]) * inv_h2);
      }
    }
    worst[static_cast<size_t>(is)] = w;
  });
  double r = 0;
  for (double w : worst) r = std::max(r, w);
  return r;
}

}  // namespace detail

inline SlitOperator make_slit_operator(const Grid& g, std::vector<uint8_t> free,
                                       const std::vector<uint8_t>& positive_plane,
                                       const TipOptions& topt = {}) {
  SlitOperator op;
  op.grid = g;
  op.free = std::move(free);
  op.tip_of.assign(static_cast<size_t>(g.total()), -1);
  detail::build_tip_stencils(op, positive_plane, topt);
  return op;
}

/// Core relaxation loop. `u` holds Dirichlet values on non-free nodes and the
/// initial guess on free ones. Converges when the FD-Laplacian residual is at
/// most tol * data_scale everywhere.
inline SorStats sor_solve(const SlitOperator& op, std::vector<double>& u, double data_scale,
                          const SorOptions& opt = {}) {
  const Grid& g = op.grid;
  int nmax = 0;
  for (int k = 0; k <= g.n; ++k) nmax = std::max(nmax, g.count[static_cast<size_t>(k)] - 1);
  double omega = opt.omega > 0 ? opt.omega : 2.0 / (1.0 + std::sin(M_PI / nmax));
  // rounding floors the Laplacian-units residual at about ulp/h^2
  double fp_floor = 64.0 * std::numeric_limits<double>::epsilon() / (g.h * g.h);
  double target = std::max(opt.tol, fp_floor) * std::max(data_scale, 1e-300);

  SorStats st;
  std::vector<double> rhs, x;
  for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    detail::sor_sweep_color(op, u, omega, 0);
    detail::sor_sweep_color(op, u, omega, 1);
    if (!op.tips.empty()) detail::block_solve(op, u, rhs, x);
    st.sweeps = sweep;
    if (sweep % opt.check_every == 0 || sweep == opt.max_sweeps) {
      st.residual = detail::max_residual(op, u);
      if (st.residual <= target) return st;
    }
  }
  fail(Err::NoConvergence, "sor_solve: sweep budget exhausted, residual " +
                               std::to_string(st.residual) + " > " + std::to_string(target));
}

/// Dirichlet data on the outer box boundary plus the pinned set Z on {s=0}.
/// positive_plane marks nodes of the {s=0} plane NOT in Z.
struct SlitProblem {
  Grid grid;
  std::vector<double> boundary_values;  // full-size array; read on outer-boundary nodes only
  std::vector<uint8_t> positive_plane;  // size plane_size()

  template <class Data, class InZ>
  static SlitProblem from(const Grid& g, Data&& data, InZ&& in_zero_set) {
    SlitProblem p;
    p.grid = g;
    p.boundary_values.assign(static_cast<size_t>(g.total()), 0.0);
    p.positive_plane.assign(static_cast<size_t>(g.plane_size()), 1);
    g.for_each([&](const std::array<int, 3>& iv) {
      Point x = g.point(iv);
      long idx = g.index(iv);
      if (g.on_outer_boundary(iv)) p.boundary_values[static_cast<size_t>(idx)] = data(x);
      if (iv[static_cast<size_t>(g.sa())] == 0 && in_zero_set(x))
        p.positive_plane[static_cast<size_t>(idx)] = 0;
    });
    return p;
  }

  double data_scale() const {
    double m = 0;
    for (double v : boundary_values) m = std::max(m, std::fabs(v));
    return m;
  }
};

inline std::vector<uint8_t> free_nodes(const SlitProblem& p) {
  const Grid& g = p.grid;
  std::vector<uint8_t> free(static_cast<size_t>(g.total()), 0);
  g.for_each([&](const std::array<int, 3>& iv) {
    if (g.on_outer_boundary(iv)) return;
    long idx = g.index(iv);
    if (iv[static_cast<size_t>(g.sa())] == 0 && !p.positive_plane[static_cast<size_t>(idx)]) return;
    free[static_cast<size_t>(idx)] = 1;
  });
  return free;
}

/// Harmonic in the box minus Z with even reflection across {s=0}; the
/// discrete maximum principle keeps nonnegative data nonnegative, and
/// violations beyond tolerance abort.
inline GridFunction solve_slit_laplace(const SlitProblem& p, double tol,
                                       const GridFunction* warm_start = nullptr,
                                       SorStats* stats = nullptr, const SorOptions& base_opt = {},
                                       const TipOptions& tip_opt = {}) {
  const Grid& g = p.grid;
  GridFunction out = GridFunction::zeros(g);
  out.values = p.boundary_values;
  out.mask = p.positive_plane;
  // boundary nodes of the plane keep their data-driven sign in the mask
  for (long q = 0; q < g.plane_size(); ++q) {
    std::array<int, 3> iv = g.unindex(q);
    if (g.on_outer_boundary(iv) && p.positive_plane[static_cast<size_t>(q)])
      out.mask[static_cast<size_t>(q)] = p.boundary_values[static_cast<size_t>(q)] > 0 ? 1 : 0;
  }
  SlitOperator op = make_slit_operator(g, free_nodes(p), p.positive_plane, tip_opt);
  if (warm_start != nullptr && warm_start->grid.same_layout(g)) {
    for (long i = 0; i < g.total(); ++i)
      if (op.free[static_cast<size_t>(i)])
        out.values[static_cast<size_t>(i)] = warm_start->values[static_cast<size_t>(i)];
  }
  SorOptions opt = base_opt;
  opt.tol = tol;
  SorStats st = sor_solve(op, out.values, std::max(p.data_scale(), 1.0), opt);
  if (stats != nullptr) *stats = st;

  bool data_nonneg = true;
  for (double v : p.boundary_values) data_nonneg &= (v >= 0);
  if (data_nonneg) {
    double floor = -10.0 * tol * std::max(p.data_scale(), 1.0);
    for (double v : out.values)
      require(v >= floor, Err::AuditFailure, "solve_slit_laplace: maximum principle violated");
    for (double& v : out.values) v = std::max(v, 0.0);
  }
  out.enforce_mask_zero();
  return out;
}

/// Re-solves g inside the ball keeping its own values as Dirichlet data and
/// its plane mask as the pinned set; g is returned unchanged outside.
inline GridFunction harmonic_replacement(const GridFunction& g, const Point& center, double radius,
                                         double tol, SorStats* stats = nullptr) {
  require(center.s == 0.0, Err::PreconditionViolation, "harmonic_replacement: center must lie on {s=0}");
  const Grid& gr = g.grid;
  GridFunction out = g;
  std::vector<uint8_t> free(static_cast<size_t>(gr.total()), 0);
  long count = 0;
  gr.for_each([&](const std::array<int, 3>& iv) {
    if (gr.on_outer_boundary(iv)) return;
    Point x = gr.point(iv);
    Point d = x;
    for (int k = 0; k < gr.n - 1; ++k) d.xp[k] -= center.xp[k];
    d.xn -= center.xn;
    if (d.norm() >= radius) return;
    long idx = gr.index(iv);
    if (iv[static_cast<size_t>(gr.sa())] == 0 && !g.mask[static_cast<size_t>(idx)]) return;
    free[static_cast<size_t>(idx)] = 1;
    ++count;
  });
  require(count > 0, Err::PreconditionViolation, "harmonic_replacement: region contains no free node");
  SlitOperator op = make_slit_operator(gr, std::move(free), g.mask);
  SorOptions opt;
  opt.tol = tol;
  SorStats st = sor_solve(op, out.values, std::max(g.max_abs(), 1.0), opt);
  if (stats != nullptr) *stats = st;
  return out;
}

struct RatioBounds {
  double lower = 0;
  double upper = 0;
  long samples = 0;
};

/// Measured bracket of (w/v) / (w/v)(e_n/2) over ball nodes where v clears
/// the floor. Recorded as a regression quantity, not asserted against the
/// boundary Harnack constant.
inline RatioBounds boundary_harnack_audit(const GridFunction& v, const GridFunction& w,
                                          const Point& center, double radius, double tol) {
  require(v.grid.same_layout(w.grid), Err::PreconditionViolation, "harnack audit: grid mismatch");
  const Grid& g = v.grid;
  double floor = 10.0 * tol * std::max(1.0, v.max_abs());

  Point ref = center;
  ref.xn += 0.5;
  std::array<int, 3> ref_iv = g.nearest(ref);
  double vref = v.at(ref_iv);
  require(vref > floor, Err::DegenerateRatio, "harnack audit: v below floor at e_n/2");
  double rref = w.at(ref_iv) / vref;
  require(std::fabs(rref) > 1e-300, Err::DegenerateRatio, "harnack audit: zero reference ratio");

  RatioBounds out;
  out.lower = 1e300;
  out.upper = -1e300;
  g.for_each([&](const std::array<int, 3>& iv) {
    Point x = g.point(iv);
    Point d = x;
    for (int k = 0; k < g.n - 1; ++k) d.xp[k] -= center.xp[k];
    d.xn -= center.xn;
    if (d.norm() > radius) return;
    double vv = v.at(iv);
    if (vv <= floor) return;
    double r = (w.at(iv) / vv) / rref;
    out.lower = std::min(out.lower, r);
    out.upper = std::max(out.upper, r);
    ++out.samples;
  });
  require(out.samples > 0, Err::DegenerateRatio, "harnack audit: no node above floor");
  return out;
}

/// Lemma 7.2-style audit: from w >= V - eps on B_1 nodes conclude
/// w >= (1 - C_audit eps) V on B_{1/2} nodes.
inline bool comparison_gain_audit(const GridFunction& w, const BarrierParams& v, double eps,
                                  double C_audit = 5.0) {
  const Grid& g = w.grid;
  // positivity set of V inside that of w on the plane, and the hypothesis
  // w >= V - eps on B_1 nodes
  bool ok_pre = true;
  g.for_each([&](const std::array<int, 3>& iv) {
    Point x = g.point(iv);
    if (x.norm() > 1.0) return;
    double vv = eval_V(v, x);
    if (iv[static_cast<size_t>(g.sa())] == 0 && vv > 0 && !w.mask[static_cast<size_t>(g.index(iv))])
      ok_pre = false;
    if (w.at(iv) < vv - eps - 1e-12) ok_pre = false;
  });
  require(ok_pre, Err::PreconditionViolation, "comparison_gain_audit: hypotheses fail on the grid");

  bool ok = true;
  double factor = 1.0 - C_audit * eps;
  g.for_each([&](const std::array<int, 3>& iv) {
    Point x = g.point(iv);
    if (x.norm() > 0.5) return;
    if (w.at(iv) < factor * eval_V(v, x) - 1e-12) ok = false;
  });
  return ok;
}

}  // namespace thinfb
