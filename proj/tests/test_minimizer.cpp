#include <catch2/catch_amalgamated.hpp>

#include "thinfb/minimizer.hpp"

using namespace thinfb;

namespace {

SlitProblem planar_problem(const Grid& g, double shift = 0.0) {
  return SlitProblem::from(
      g, [=](const Point& x) { return eval_U(x.xn + shift, x.s); },
      [=](const Point& x) { return x.xn + shift <= 1e-12; });
}

EnergyState synthetic_state(const Grid& g, const std::function<double(const Point&)>& fn) {
  EnergyState st;
  st.g = GridFunction::sample(g, fn);
  st.energy = discrete_energy(st.g);
  return st;
}

}  // namespace

TEST_CASE("zero data minimizes to the zero state") {
  Grid g = Grid::symmetric(1, 1.0 / 16, 1.0, 1.0);
  SlitProblem p = SlitProblem::from(
      g, [](const Point&) { return 0.0; }, [](const Point&) { return true; });
  EnergyState st = minimize_energy(p);
  CHECK(st.energy == 0.0);
  CHECK(st.g.max_abs() == 0.0);
  long card = 0;
  for (uint8_t m : st.g.mask) card += m;
  CHECK(card == 0);
}

TEST_CASE("planar data recovers the flat free boundary") {
  Grid g = Grid::symmetric(1, 1.0 / 64, 1.0, 1.0);
  EnergyState st = minimize_energy(planar_problem(g));
  CHECK_FALSE(st.budget_exhausted);

  // energy trace non-increasing
  for (size_t i = 1; i < st.energy_trace.size(); ++i)
    CHECK(st.energy_trace[i] <= st.energy_trace[i - 1] + 1e-12);

  FreeBoundary fb = extract_free_boundary(st);
  REQUIRE(fb.points.size() == 1);
  CHECK(std::fabs(fb.points[0].x.xn) <= 2 * g.h + 1e-12);
  CHECK(fb.points[0].nu_xn == 1.0);

  // discrete energy within 1% of the exact-U oracle on the same grid
  GridFunction oracle = GridFunction::sample(g, [](const Point& x) { return eval_U(x.xn, x.s); });
  double e_oracle = discrete_energy(oracle);
  CHECK(std::fabs(st.energy - e_oracle) <= 0.01 * e_oracle);
  CHECK(st.energy <= e_oracle + 1e-12);  // the solve minimizes the same functional

  double alpha = estimate_alpha(st, fb.points[0]);
  CHECK(alpha > 0.9);
  CHECK(alpha < 1.1);
}

TEST_CASE("translated data moves the free boundary accordingly") {
  Grid g = Grid::symmetric(1, 1.0 / 64, 1.0, 1.0);
  double shift = 0.05;
  EnergyState st = minimize_energy(planar_problem(g, shift));
  FreeBoundary fb = extract_free_boundary(st);
  REQUIRE(fb.points.size() == 1);
  CHECK(std::fabs(fb.points[0].x.xn + shift) <= 2 * g.h + g.h + 1e-12);
}

TEST_CASE("scaling covariance: the rescaled planar problem is the same problem") {
  // lambda^{-1/2} U(lambda X) = U(X): the rescaled data reproduces the same
  // discrete problem, so free boundaries agree within grid resolution
  Grid g1 = Grid::symmetric(1, 1.0 / 32, 0.5, 0.5);
  Grid g2 = Grid::symmetric(1, 1.0 / 16, 1.0, 1.0);
  EnergyState s1 = minimize_energy(planar_problem(g1));
  EnergyState s2 = minimize_energy(planar_problem(g2));
  double fb1 = extract_free_boundary(s1).points[0].x.xn;
  double fb2 = extract_free_boundary(s2).points[0].x.xn;
  CHECK(std::fabs(fb1) <= 2 * g1.h + 1e-12);
  CHECK(std::fabs(fb2 / 2.0) <= 2 * g1.h + 1e-12);
}

TEST_CASE("free boundary extraction: circle mask normals are radial") {
  Grid g = Grid::symmetric(2, 1.0 / 24, 1.0, 0.5);
  EnergyState st;
  st.g = GridFunction::zeros(g);
  double r0 = 0.45;
  for (long q = 0; q < g.plane_size(); ++q) {
    std::array<int, 3> iv = g.unindex(q);
    Point x = g.point(iv);
    double rr = std::hypot(x.xp[0], x.xn);
    st.g.mask[static_cast<size_t>(q)] = rr < r0 ? 1 : 0;
  }
  FreeBoundary fb = extract_free_boundary(st);
  CHECK(fb.points.size() > 20);
  double worst_deg = 0;
  for (const auto& pt : fb.points) {
    if (std::fabs(pt.x.xp[0]) > 0.4 || std::fabs(pt.x.xn) > 0.4) {
      double rr = std::hypot(pt.x.xp[0], pt.x.xn);
      double inward_x = -pt.x.xp[0] / rr, inward_n = -pt.x.xn / rr;
      double dot = std::clamp(inward_x * pt.nu_xp[0] + inward_n * pt.nu_xn, -1.0, 1.0);
      worst_deg = std::max(worst_deg, std::acos(dot) * 180.0 / M_PI);
    }
  }
  CHECK(worst_deg < 5.0);
}

TEST_CASE("empty mask throws EmptyBoundary") {
  Grid g = Grid::symmetric(1, 1.0 / 16, 1.0, 1.0);
  EnergyState st;
  st.g = GridFunction::zeros(g);
  CHECK_THROWS_AS(extract_free_boundary(st), Error);
}

TEST_CASE("alpha estimates on exact profiles") {
  Grid g = Grid::symmetric(1, 1.0 / 64, 1.0, 1.0);
  EnergyState st = synthetic_state(g, [](const Point& x) { return eval_U(x.xn, x.s); });
  FreeBoundaryPoint pt;
  pt.iv = g.nearest(Point::plane(0, 0));
  pt.x = Point::plane(0, 0);
  pt.nu_xp = Vec::zeros(0);
  pt.nu_xn = 1.0;
  CHECK(estimate_alpha(st, pt) == Catch::Approx(1.0).margin(1e-9));

  EnergyState st15 = synthetic_state(g, [](const Point& x) { return 1.5 * eval_U(x.xn, x.s); });
  CHECK(estimate_alpha(st15, pt) == Catch::Approx(1.5).margin(1e-9));

  BarrierParams v = BarrierParams::planar(0, 0.04, 0.02);
  EnergyState stv = synthetic_state(g, [&](const Point& x) { return eval_V(v, x); });
  CHECK(estimate_alpha(stv, pt) == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("viscosity touch audit on planar states") {
  Grid g = Grid::symmetric(1, 1.0 / 64, 1.0, 1.0);
  EnergyState st = minimize_energy(planar_problem(g));
  double delta = 0.05;

  SECTION("an honest solution passes against a margin subsolution") {
    BarrierParams v = BarrierParams::planar(0, delta, 0.0);
    CHECK(viscosity_touch_audit(st, v, delta, 10.0));
  }
  SECTION("an inflated profile is flagged") {
    EnergyState bad = synthetic_state(g, [](const Point& x) { return 1.5 * eval_U(x.xn, x.s); });
    bad.g.mask = st.g.mask;
    BarrierParams v = BarrierParams::planar(0, delta, 0.0);
    CHECK_FALSE(viscosity_touch_audit(bad, v, delta, 10.0));
  }
  SECTION("a supersolution held above g reports NoContact") {
    BarrierParams v = BarrierParams::planar(0, -delta, 0.0);
    TouchAuditOptions opt;
    opt.slide_min = -0.3;
    opt.slide_max = -0.05;  // range keeps the barrier raised above g
    CHECK_THROWS_AS(viscosity_touch_audit(st, v, delta, 10.0, opt), Error);
  }
}

TEST_CASE("flatness decay on the exact profile is flat zero") {
  Grid g = Grid::symmetric(1, 1.0 / 64, 1.0, 1.0);
  EnergyState st = synthetic_state(g, [](const Point& x) { return eval_U(x.xn, x.s); });
  DecayOptions dopt;
  dopt.min_scale_cells = 6;
  DecayReport rep = flatness_decay_experiment(st, Point::plane(0, 0), {0.5, 0.25, 0.125}, dopt);
  REQUIRE(rep.scales.size() == 3);
  // the mathematical object vanishes; the grid evaluator carries an
  // interpolation floor of order h^2 over (dist * lambda)
  for (const auto& s : rep.scales) CHECK(s.oscillation < 12 * g.h * g.h / (s.lambda * s.lambda));
}

TEST_CASE("hodograph oscillation of a V0 barrier stays within C1 delta^2 of gamma_V") {
  double delta = 0.06;
  BarrierParams v = BarrierParams::planar(0, delta, -delta);  // a + b = 0 = tr M
  REQUIRE(in_class_V0(v, delta));
  Grid g = Grid::symmetric(1, 1.0 / 32, 1.0, 1.0);
  auto ev = [&](const Point& p) { return eval_V(v, p); };
  for (double lam : {0.6, 0.3, 0.15}) {
    HodographOptions opt;
    opt.eps_bound = 4 * delta + 0.05;
    HodographField f = compute_hodograph(ev, g, Point::plane(0, 0), lam, opt);
    double worst = 0;
    for (const auto& n : f.nodes) worst = std::max(worst, std::fabs(n.w.mid() - gamma_V(v, n.x)));
    CHECK(worst <= 10.0 * delta * delta);
  }
}

TEST_CASE("improvement fit: exact barrier state has zero drift") {
  double delta = 0.2;
  BarrierParams v = BarrierParams::planar(1, delta, -delta);
  Grid g = Grid::symmetric(2, 1.0 / 24, 1.0, 0.5);
  EnergyState st = synthetic_state(g, [&](const Point& x) { return eval_V(v, x); });
  DriftOptions dopt;
  dopt.min_scale_cells = 5;
  DriftReport rep =
      improvement_of_flatness_fit(st, Point::make(Vec::zeros(1), 0, 0), 0.5, 0.7, 0.5, dopt);
  REQUIRE(rep.fits.size() >= 3);
  for (const auto& f : rep.fits) {
    CHECK(f.a == Catch::Approx(delta).margin(0.05));
    CHECK(f.b == Catch::Approx(-delta).margin(0.05));
    CHECK(f.defect_hat <= 20 * f.fit_rms + 1e-9);
  }
  for (double d : rep.drift) CHECK(d < 0.05);
}

TEST_CASE("improvement fit: tilted profile reports the tilt at the coarsest scale") {
  double tilt = 0.08;
  Grid g = Grid::symmetric(2, 1.0 / 24, 1.0, 0.5);
  double nn = std::sqrt(1.0 + tilt * tilt);
  EnergyState st = synthetic_state(g, [&](const Point& x) {
    return eval_U((tilt * x.xp[0] + x.xn) / nn, x.s);
  });
  DriftOptions dopt;
  dopt.min_scale_cells = 5;
  DriftReport rep =
      improvement_of_flatness_fit(st, Point::make(Vec::zeros(1), 0, 0), 0.5, 0.7, 0.5, dopt);
  REQUIRE(!rep.fits.empty());
  // the fitted surface slope matches the free boundary line x_n = -tilt x1
  CHECK(rep.fits.front().xi == Catch::Approx(-tilt).margin(0.02));
  CHECK(std::fabs(rep.fits.front().a) < 0.05);
  CHECK(std::fabs(rep.fits.front().M) < 0.3);
}
