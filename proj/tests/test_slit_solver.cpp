#include <catch2/catch_amalgamated.hpp>

#include "thinfb/slit_solver.hpp"

using namespace thinfb;

namespace {

Grid unit_grid(int n, double h) { return Grid::symmetric(n, h, 1.0, 1.0); }

SlitProblem planar_U_problem(const Grid& g) {
  return SlitProblem::from(
      g, [](const Point& x) { return eval_U(x.xn, x.s); },
      [](const Point& x) { return x.xn <= 1e-12; });
}

}  // namespace

TEST_CASE("grid indexing round trip and layout") {
  for (int n : {1, 2}) {
    Grid g = unit_grid(n, 0.25);
    g.for_each([&](const std::array<int, 3>& iv) {
      long idx = g.index(iv);
      CHECK(g.unindex(idx) == iv);
    });
    CHECK(g.stride(0) == 1);
    CHECK(g.plane_size() == g.total() / g.count[static_cast<size_t>(n)]);
    // s = 0 plane occupies the leading block
    std::array<int, 3> iv{};
    iv[static_cast<size_t>(n)] = 0;
    CHECK(g.index(iv) == 0);
  }
}

TEST_CASE("interpolation is exact on multilinear data and even in s") {
  Grid g = unit_grid(2, 0.125);
  auto fn = [](const Point& p) { return 2.0 + 0.3 * p.xp[0] - 0.7 * p.xn + 0.1 * p.s; };
  GridFunction f = GridFunction::sample(g, fn);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    Point p;
    p.xp = Vec::zeros(1);
    p.xp[0] = rng.uniform(-0.9, 0.9);
    p.xn = rng.uniform(-0.9, 0.9);
    p.s = rng.uniform(0, 0.9);
    CHECK(f.interp(p) == Catch::Approx(fn(p)).margin(1e-12));
    Point m = p;
    m.s = -p.s;
    CHECK(f.interp(m) == Catch::Approx(f.interp(p)).margin(1e-15));
  }
  // line interpolation along e_n with on-grid x', s
  Point q;
  q.xp = Vec::zeros(1);
  q.xp[0] = 0.25;
  q.s = 0.5;
  q.xn = 0.3141;
  CHECK(f.interp_en(q) == Catch::Approx(fn(q)).margin(1e-12));
}

TEST_CASE("grid function binary round trip") {
  Grid g = unit_grid(1, 0.25);
  GridFunction f = GridFunction::sample(g, [](const Point& p) { return eval_U(p.xn, p.s); });
  f.save_binary("/tmp/thinfb_test_grid.bin");
  GridFunction r = GridFunction::load_binary("/tmp/thinfb_test_grid.bin");
  CHECK(r.grid.same_layout(f.grid));
  CHECK(r.values == f.values);
  CHECK(r.mask == f.mask);
}

TEST_CASE("pinned plane with linear data is reproduced exactly") {
  Grid g = unit_grid(1, 1.0 / 16);
  SlitProblem p = SlitProblem::from(
      g, [](const Point& x) { return x.s; }, [](const Point&) { return true; });
  GridFunction sol = solve_slit_laplace(p, 1e-12);
  g.for_each([&](const std::array<int, 3>& iv) {
    CHECK(sol.at(iv) == Catch::Approx(g.point(iv).s).margin(1e-10));
  });
}

TEST_CASE("slit solve recovers U and converges at second order away from L") {
  std::vector<double> hs{1.0 / 16, 1.0 / 32, 1.0 / 64}, errs;
  for (double h : hs) {
    Grid g = unit_grid(1, h);
    GridFunction sol = solve_slit_laplace(planar_U_problem(g), 1e-11);
    double worst = 0;
    g.for_each([&](const std::array<int, 3>& iv) {
      Point x = g.point(iv);
      if (x.norm() < 0.1) return;  // distance from L = {0}
      worst = std::max(worst, std::fabs(sol.at(iv) - eval_U(x.xn, x.s)));
    });
    errs.push_back(worst);
  }
  CHECK(errs.back() < 5e-4);
  CHECK(fit_loglog_slope(hs, errs) > 1.8);
}

TEST_CASE("solution dominates a subsolution barrier") {
  double delta = 0.05;
  Grid g = unit_grid(1, 1.0 / 32);
  BarrierParams v = BarrierParams::planar(0, delta, 0.0);
  SlitProblem p = SlitProblem::from(
      g, [&](const Point& x) { return eval_V(v, x); },
      [](const Point& x) { return x.xn <= 1e-12; });
  GridFunction sol = solve_slit_laplace(p, 1e-11);
  double worst = 0;
  g.for_each([&](const std::array<int, 3>& iv) {
    Point x = g.point(iv);
    worst = std::min(worst, sol.at(iv) - eval_V(v, x));
  });
  CHECK(worst > -5e-4);  // discrete max principle up to truncation near the tip
}

TEST_CASE("discrete maximum principle and even symmetry") {
  Grid g = unit_grid(1, 1.0 / 24);
  Rng rng(17);
  // nonnegative boundary data, zero set on the negative axis
  SlitProblem p = SlitProblem::from(
      g, [&](const Point& x) { return 0.5 + 0.5 * std::sin(3 * x.xn) * std::cos(2 * x.s); },
      [](const Point& x) { return x.xn <= 1e-12; });
  GridFunction sol = solve_slit_laplace(p, 1e-11);
  double bmax = 0;
  g.for_each([&](const std::array<int, 3>& iv) {
    if (g.on_outer_boundary(iv)) bmax = std::max(bmax, sol.at(iv));
  });
  double imax = 0, imin = 1e300;
  std::vector<uint8_t> free = free_nodes(p);
  g.for_each([&](const std::array<int, 3>& iv) {
    if (!free[static_cast<size_t>(g.index(iv))]) return;
    imax = std::max(imax, sol.at(iv));
    imin = std::min(imin, sol.at(iv));
  });
  CHECK(imax <= bmax + 1e-9);
  CHECK(imin >= 0.0);
  // interp handles s < 0 by reflection
  Point q;
  q.xp = Vec::zeros(0);
  q.xn = 0.3;
  q.s = 0.4;
  Point qm = q;
  qm.s = -0.4;
  CHECK(sol.interp(q) == sol.interp(qm));
  (void)rng;
}

TEST_CASE("solver is linear in the data") {
  Grid g = unit_grid(1, 1.0 / 24);
  auto inZ = [](const Point& x) { return x.xn <= 1e-12; };
  auto d1 = [](const Point& x) { return eval_U(x.xn, x.s); };
  auto d2 = [](const Point& x) { return x.s * x.s - 0.5 * x.xn * x.xn + 1.0; };
  SlitProblem p1 = SlitProblem::from(g, d1, inZ);
  SlitProblem p2 = SlitProblem::from(g, d2, inZ);
  SlitProblem p12 = SlitProblem::from(
      g, [&](const Point& x) { return 2.0 * d1(x) + 0.5 * d2(x); }, inZ);
  GridFunction s1 = solve_slit_laplace(p1, 1e-11);
  GridFunction s2 = solve_slit_laplace(p2, 1e-11);
  GridFunction s12 = solve_slit_laplace(p12, 1e-11);
  double worst = 0;
  g.for_each([&](const std::array<int, 3>& iv) {
    worst = std::max(worst, std::fabs(s12.at(iv) - 2.0 * s1.at(iv) - 0.5 * s2.at(iv)));
  });
  CHECK(worst < 1e-8);
}

TEST_CASE("harmonic replacement is a fixed point on harmonic data") {
  Grid g = unit_grid(1, 1.0 / 32);
  GridFunction u = solve_slit_laplace(planar_U_problem(g), 1e-11);
  GridFunction r = harmonic_replacement(u, Point::plane(0, 0), 0.5, 1e-11);
  double worst = 0;
  g.for_each([&](const std::array<int, 3>& iv) {
    worst = std::max(worst, std::fabs(r.at(iv) - u.at(iv)));
  });
  CHECK(worst < 1e-8);

  // replacement of exact U with mask {x_n > 0} stays U up to solver accuracy
  GridFunction exact = GridFunction::sample(g, [](const Point& p) { return eval_U(p.xn, p.s); });
  GridFunction rep = harmonic_replacement(exact, Point::plane(0, 0), 0.5, 1e-11);
  worst = 0;
  g.for_each([&](const std::array<int, 3>& iv) {
    worst = std::max(worst, std::fabs(rep.at(iv) - exact.at(iv)));
  });
  CHECK(worst < 5e-4);  // discretization level at h = 1/32
}

TEST_CASE("replacement of the max of ordered barriers lies between them") {
  Grid g = unit_grid(1, 1.0 / 32);
  BarrierParams lowV = BarrierParams::planar(0, 0.05, 0.0);
  BarrierParams hiV = BarrierParams::planar(0, 0.05, 0.05);
  GridFunction m = GridFunction::sample(
      g, [&](const Point& p) { return std::max(eval_V(lowV, p), eval_V(hiV, p)); });
  GridFunction rep = harmonic_replacement(m, Point::plane(0, 0), 0.6, 1e-11);
  // subharmonic input: replacement does not decrease
  double drop = 0;
  g.for_each([&](const std::array<int, 3>& iv) {
    drop = std::min(drop, rep.at(iv) - m.at(iv));
  });
  CHECK(drop > -5e-4);
}

TEST_CASE("boundary Harnack audit basics") {
  Grid g = unit_grid(1, 1.0 / 32);
  GridFunction v = solve_slit_laplace(planar_U_problem(g), 1e-11);
  SECTION("w = v and w = 2v normalize to (1,1)") {
    RatioBounds rb = boundary_harnack_audit(v, v, Point::plane(0, 0), 0.75, 1e-11);
    CHECK(rb.lower == Catch::Approx(1.0));
    CHECK(rb.upper == Catch::Approx(1.0));
    GridFunction w = v;
    for (double& x : w.values) x *= 2;
    rb = boundary_harnack_audit(v, w, Point::plane(0, 0), 0.75, 1e-11);
    CHECK(rb.lower == Catch::Approx(1.0));
    CHECK(rb.upper == Catch::Approx(1.0));
  }
  SECTION("translated data stays in a recorded bracket") {
    SlitProblem p = SlitProblem::from(
        g, [](const Point& x) { return eval_U(x.xn + 0.1, x.s); },
        [](const Point& x) { return x.xn <= 1e-12; });
    GridFunction w = solve_slit_laplace(p, 1e-11);
    RatioBounds rb = boundary_harnack_audit(v, w, Point::plane(0, 0), 0.75, 1e-11);
    CHECK(rb.lower > 0.2);
    CHECK(rb.upper < 5.0);
    CHECK(rb.lower <= 1.0 + 1e-12);
    CHECK(rb.upper >= 1.0 - 1e-12);
  }
}

TEST_CASE("comparison gain audit") {
  Grid g = unit_grid(1, 1.0 / 32);
  double delta = 0.05;
  BarrierParams v = BarrierParams::planar(0, delta, 0.0);  // subsolution margin delta
  GridFunction w = GridFunction::sample(g, [&](const Point& p) { return eval_V(v, p); });
  CHECK(comparison_gain_audit(w, v, 0.0));
  // harmonic w with data V dominates (1 - C eps)V once eps slack is granted
  SlitProblem p = SlitProblem::from(
      g, [&](const Point& x) { return eval_V(v, x); },
      [&](const Point& x) { return eval_V(v, Point::plane(x.xn, 0)) <= 0 && x.xn <= 0; });
  GridFunction wh = solve_slit_laplace(p, 1e-11);
  CHECK(comparison_gain_audit(wh, v, 0.01));
}

TEST_CASE("optimal regularity: growth exponent of g on the plane is about 1/2") {
  Grid g = unit_grid(1, 1.0 / 64);
  GridFunction sol = solve_slit_laplace(planar_U_problem(g), 1e-11);
  // distance to the zero set {x_n <= 0} is x_n on the plane
  std::vector<double> ds, vals;
  for (double d = 4 * g.h; d <= 32 * g.h; d *= 2) {
    Point q;
    q.xp = Vec::zeros(0);
    q.xn = d;
    q.s = 0;
    ds.push_back(d);
    vals.push_back(sol.interp(q));
  }
  double expo = fit_loglog_slope(ds, vals);
  CHECK(expo > 0.45);
  CHECK(expo < 0.55);
}
