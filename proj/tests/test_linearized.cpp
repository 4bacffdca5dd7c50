#include <catch2/catch_amalgamated.hpp>

#include "thinfb/linearized.hpp"
#include "thinfb/slit_solver.hpp"

using namespace thinfb;

namespace {

double cubic_h(double t, double s) {
  double rho = std::hypot(t, s);
  return 8 * rho * t - 4 * rho * rho;
}

}  // namespace

TEST_CASE("conformal map spec points and round trip") {
  SlitPlanePoint p = conformal_pull(std::sqrt(2.0), 0);
  CHECK(p.t == Catch::Approx(1.0));
  CHECK(p.s == Catch::Approx(0.0).margin(1e-15));
  p = conformal_pull(1, 1);
  CHECK(p.t == Catch::Approx(0.0).margin(1e-15));
  CHECK(p.s == Catch::Approx(1.0));
  HalfPlanePoint w = conformal_push(-1.0, 1e-300);
  CHECK(w.zeta == Catch::Approx(0.0).margin(1e-12));
  CHECK(std::fabs(w.y) == Catch::Approx(std::sqrt(2.0)));

  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    double t = rng.uniform(-1, 1), s = rng.uniform(-1, 1);
    HalfPlanePoint q = conformal_push(t, s);
    CHECK(q.zeta >= 0);
    SlitPlanePoint back = conformal_pull(q.zeta, q.y);
    CHECK(back.t == Catch::Approx(t).margin(1e-12));
    CHECK(back.s == Catch::Approx(s).margin(1e-12));
  }
}

TEST_CASE("constant h gives the pure U_t mode") {
  HalfDiskSolveOptions opt;
  opt.nr = 96;
  HalfDiskField f = solve_linearized_2d([](double, double) { return 1.0; }, opt);
  CHECK(f.h0 == Catch::Approx(1.0).margin(1e-6));
  // regular part nearly vanishes
  double rmax = 0;
  for (double v : f.values) rmax = std::max(rmax, std::fabs(v));
  CHECK(rmax < 1e-6);
  for (double t : {0.1, 0.25, -0.2}) CHECK(recover_h(f, t, 0.22) == Catch::Approx(1.0).margin(1e-5));
}

TEST_CASE("harmonic cubic slice is solved and mapped to (a,b) = (8,-8)") {
  HalfDiskSolveOptions opt;
  opt.nr = 128;
  HalfDiskField f = solve_linearized_2d([](double t, double s) { return cubic_h(t, s); }, opt);
  Expansion2D e = extract_expansion(f);
  CHECK(e.h0 == Catch::Approx(0.0).margin(1e-6));
  CHECK(e.a == Catch::Approx(8.0).margin(2e-4));
  CHECK(e.b == Catch::Approx(-8.0).margin(2e-4));
  CHECK(std::fabs(e.a + e.b) < 1e-5);
  CHECK(edge_condition_audit(f));

  // the conformal image is the harmonic cubic (zeta^3 - 3 zeta y^2)/sqrt(2)
  const double s2 = std::sqrt(2.0);
  for (int i = f.nr / 4; i <= f.nr; i += f.nr / 4)
    for (int j = f.nb / 6; j < f.nb; j += f.nb / 6) {
      double z = f.zeta_of(i, j), y = f.y_of(i, j);
      CHECK(f.at(i, j) == Catch::Approx((z * z * z - 3 * z * y * y) / s2).margin(2e-6));
    }
}

TEST_CASE("mixed family recovers both coefficients") {
  double c0 = 0.3, c1 = 0.5;
  HalfDiskSolveOptions opt;
  opt.nr = 128;
  HalfDiskField f = solve_linearized_2d(
      [&](double t, double s) { return c0 + c1 * cubic_h(t, s); }, opt);
  Expansion2D e = extract_expansion(f);
  CHECK(e.h0 == Catch::Approx(c0).margin(1e-6));
  CHECK(e.a == Catch::Approx(8 * c1).margin(2e-4));
  CHECK(e.b == Catch::Approx(-8 * c1).margin(2e-4));
  for (double t : {0.05, 0.18}) {
    CHECK(recover_h(f, t, 0.1) == Catch::Approx(c0 + c1 * cubic_h(t, 0.1)).margin(1e-4));
  }
}

TEST_CASE("r-mode fields fail the edge audit") {
  // h proportional to rho pushes to H = c zeta: harmonic, zero trace on the
  // slit, but d0 != 0
  HalfDiskField bad = HalfDiskField::sample(128, 384, [](double z, double) { return 0.3 * z; });
  CHECK_FALSE(edge_condition_audit(bad));
  Expansion2D e = extract_expansion(bad);
  CHECK(e.edge_defect_ratio > 1.0);

  HalfDiskField good =
      HalfDiskField::sample(128, 384, [](double z, double y) { return z * z * z - 3 * z * y * y; });
  CHECK(edge_condition_audit(good));
}

TEST_CASE("strip_zeta on closed forms") {
  HalfDiskField f1 = HalfDiskField::sample(64, 192, [](double z, double) { return z; });
  HalfDiskField s1 = strip_zeta(f1);
  HalfDiskField f3 =
      HalfDiskField::sample(64, 192, [](double z, double y) { return z * z * z - 3 * z * y * y; });
  HalfDiskField s3 = strip_zeta(f3);
  HalfDiskField fs = HalfDiskField::sample(64, 192, [](double z, double y) { return z * std::sin(y); });
  HalfDiskField ss = strip_zeta(fs);
  for (int i = 4; i <= 64; i += 6)
    for (int j = 0; j <= 192; j += 16) {
      double z = f1.zeta_of(i, j), y = f1.y_of(i, j);
      CHECK(s1.at(i, j) == Catch::Approx(1.0).margin(5e-3));
      CHECK(s3.at(i, j) == Catch::Approx(z * z - 3 * y * y).margin(5e-3));
      CHECK(ss.at(i, j) == Catch::Approx(std::sin(y)).margin(5e-3));
    }
}

TEST_CASE("Holder-quotient audit of the zeta division") {
  // sup |zeta^{-1} H| <= sup |dH/dzeta| (k = 1 case, mean value along the
  // horizontal segment), checked on a common subregion
  HalfDiskField f =
      HalfDiskField::sample(96, 288, [](double z, double y) { return z * (0.7 + 0.2 * y * y + 0.1 * z); });
  HalfDiskField s = strip_zeta(f);
  double sup_s = 0, grad_bound = 0;
  const double fd = 0.01;
  for (int i = 1; i <= 96; ++i)
    for (int j = 0; j <= 288; ++j) {
      double z = f.zeta_of(i, j), y = f.y_of(i, j);
      if (f.r_of(i) <= 0.9) sup_s = std::max(sup_s, std::fabs(s.at(i, j)));
      if (f.r_of(i) <= 0.95 && z >= fd) {
        double dz = (f.interp_reg(z + fd, y) - f.interp_reg(z - fd, y)) / (2 * fd);
        grad_bound = std::max(grad_bound, std::fabs(dz));
      }
    }
  CHECK(sup_s <= grad_bound + 5e-3);
}

TEST_CASE("constant forcing satisfies the 6d1+2d2 relation") {
  double c = 0.8;
  auto zero_data = [](double, double) { return 0.0; };
  auto f_const = [&](double, double) { return c; };
  HalfDiskSolveOptions opt;
  opt.nr = 128;
  HalfDiskField f = solve_linearized_2d(zero_data, &f_const, opt);
  Expansion2D e = extract_expansion(f);
  CHECK(e.consistency_defect < 1e-5);
  // a + b = -f(0): the x'-Laplacian relation after the sign convention
  CHECK(e.a + e.b == Catch::Approx(-c).margin(1e-4));
}

TEST_CASE("conformal invariance: half-disk solve matches the direct slit solve") {
  // h(0) = 0 here: for h(0) != 0 the product U_t h is unbounded at the tip
  // and a box Dirichlet solve picks the bounded solution instead
  double c1 = 0.4;
  auto h_fn = [&](double t, double s) { return c1 * cubic_h(t, s); };
  HalfDiskSolveOptions opt;
  opt.nr = 128;
  HalfDiskField field = solve_linearized_2d(h_fn, opt);

  // direct solve of Delta H = 0 for H = U_t h on the slit box
  Grid g = Grid::symmetric(1, 1.0 / 96, 0.5, 0.5);
  SlitProblem p = SlitProblem::from(
      g,
      [&](const Point& x) {
        double rho = std::hypot(x.xn, x.s);
        return rho > 0 ? U_t(x.xn, x.s) * h_fn(x.xn, x.s) : 0.0;
      },
      [](const Point& x) { return x.xn <= 1e-12; });
  GridFunction direct = solve_slit_laplace(p, 1e-11);

  Rng rng(77);
  for (int i = 0; i < 40; ++i) {
    double t = rng.uniform(-0.3, 0.35), s = rng.uniform(0.05, 0.35);
    if (dist_to_slit(t, s) < 0.08) continue;
    double h_direct = direct.interp(Point::plane(t, s)) / U_t(t, s);
    CHECK(recover_h(field, t, s) == Catch::Approx(h_direct).margin(5e-3));
  }
}
