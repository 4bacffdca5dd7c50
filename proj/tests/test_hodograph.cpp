#include <catch2/catch_amalgamated.hpp>

#include "thinfb/hodograph.hpp"

using namespace thinfb;

namespace {

Grid snapped_grid(int n, double h, double half, double s_max) {
  double half2 = h * std::round(half / h);
  double smax2 = h * std::round(s_max / h);
  return Grid::symmetric(n, h, half2, smax2);
}

Grid plane_grid(double h, double half = 1.4, double s_max = 1.4) {
  return snapped_grid(1, h, half, s_max);
}

Point origin(int tangent) { return Point::make(Vec::zeros(tangent), 0, 0); }

}  // namespace

TEST_CASE("hodograph of U is zero and of a translate is the shift") {
  Grid g = plane_grid(0.1);
  auto u = [](const Point& p) { return eval_U(p.xn, p.s); };
  HodographField f0 = compute_hodograph(u, g, origin(0), 0.8);
  for (const auto& n : f0.nodes) CHECK(std::fabs(n.w.mid()) < 1e-9);

  double c = 0.07;
  auto ut = [&](const Point& p) { return eval_U(p.xn + c, p.s); };
  HodographField fc = compute_hodograph(ut, g, origin(0), 0.8);
  for (const auto& n : fc.nodes) CHECK(n.w.mid() == Catch::Approx(c).margin(1e-9));
}

TEST_CASE("translation covariance at root tolerance") {
  Grid g = plane_grid(0.15);
  BarrierParams v = BarrierParams::planar(0, 0.06, -0.02);
  auto base = [&](const Point& p) { return eval_V(v, p); };
  double c = 0.05;
  auto shifted = [&](const Point& p) { return eval_V(v, p.shifted_en(c)); };
  HodographField fb = compute_hodograph(base, g, origin(0), 0.7);
  HodographField fs = compute_hodograph(shifted, g, origin(0), 0.7);
  REQUIRE(fb.nodes.size() == fs.nodes.size());
  for (size_t i = 0; i < fb.nodes.size(); ++i)
    CHECK(fs.nodes[i].w.mid() == Catch::Approx(fb.nodes[i].w.mid() + c).margin(1e-8));
}

TEST_CASE("barrier hodograph stays within C1 delta^2 of gamma_V") {
  Grid g = snapped_grid(2, 1.0 / 12, 1.2, 1.2);
  Rng rng(41);
  BarrierConfig cfg;
  for (double delta : {0.04, 0.08}) {
    for (int trial = 0; trial < 3; ++trial) {
      BarrierParams v = BarrierParams::planar(1);
      v.surface.M.at(0, 0) = rng.uniform(-delta, delta);
      v.surface.xi[0] = rng.uniform(-delta, delta);
      v.a = rng.uniform(-delta, delta);
      v.b = rng.uniform(-delta, delta);
      auto ev = [&](const Point& p) { return eval_V(v, p); };
      HodographOptions opt;
      opt.eps_bound = 4 * delta + 0.05;
      HodographField f = compute_hodograph(ev, g, origin(1), 1.0, opt);
      double sup = 0;
      for (const auto& n : f.nodes)
        sup = std::max(sup, std::fabs(n.w.mid() - gamma_V(v, n.x)));
      CHECK(sup <= cfg.C1 * delta * delta);
    }
  }
}

TEST_CASE("multivalued intervals obey the flatness bound") {
  // non-monotone eps-flat perturbation of U
  double eps = 0.08;
  auto g = [&](const Point& p) {
    return eval_U(p.xn + eps * std::sin(7 * p.xn) * std::cos(3 * p.s), p.s);
  };
  Grid gr = plane_grid(0.07);
  HodographOptions opt;
  opt.eps_bound = 3 * eps;
  opt.scan_subdivisions = 96;
  HodographField f = compute_hodograph(g, gr, origin(0), 0.8, opt);
  for (const auto& n : f.nodes) {
    CHECK(n.w.width() <= 2 * eps + 1e-9);
    CHECK(n.w.w_min >= -eps - 1e-9);
    CHECK(n.w.w_max <= eps + 1e-9);
  }
}

TEST_CASE("hodograph midpoints are monotone under pointwise ordering") {
  Grid g = plane_grid(0.12);
  BarrierParams v = BarrierParams::planar(0, 0.05, 0.0);
  auto g1 = [&](const Point& p) { return eval_V(v, p); };
  auto g2 = [&](const Point& p) { return eval_V(v, p.shifted_en(0.04)); };  // g1 <= g2
  HodographField f1 = compute_hodograph(g1, g, origin(0), 0.7);
  HodographField f2 = compute_hodograph(g2, g, origin(0), 0.7);
  for (size_t i = 0; i < f1.nodes.size(); ++i)
    CHECK(f1.nodes[i].w.mid() <= f2.nodes[i].w.mid() + 1e-9);
}

TEST_CASE("inverse hodograph constants") {
  Grid g = plane_grid(0.1, 1.0, 1.0);
  double eps = 0.05;
  GridFunction u0 = inverse_hodograph([](const Point&) { return 0.0; }, eps, g);
  GridFunction u1 = inverse_hodograph([](const Point&) { return 1.0; }, eps, g);
  g.for_each([&](const std::array<int, 3>& iv) {
    Point x = g.point(iv);
    CHECK(u0.at(iv) == Catch::Approx(eval_U(x.xn, x.s)).margin(1e-10));
    CHECK(u1.at(iv) == Catch::Approx(eval_U(x.xn + eps, x.s)).margin(1e-10));
  });
}

TEST_CASE("inverse hodograph detects folding") {
  Grid g = plane_grid(0.1, 1.0, 1.0);
  auto steep = [](const Point& p) { return 40.0 * p.xn; };  // eps * dphi/dxn > 1
  CHECK_THROWS_AS(inverse_hodograph(steep, 0.05, g), Error);
}

TEST_CASE("round trip: hodograph of inverse recovers phi at O(h^2)") {
  auto phi = [](const Point& p) { return 0.4 + 0.3 * std::sin(p.xn) * std::cos(p.s); };
  double eps = 0.04;
  std::vector<double> hs{0.05, 0.025, 0.0125}, errs;
  for (double h : hs) {
    Grid g = plane_grid(h, 1.0, 1.0);
    GridFunction pe = inverse_hodograph(phi, eps, g);
    HodographOptions opt;
    opt.eps_bound = 2 * eps;
    HodographField f = compute_hodograph(pe, origin(0), 0.6, opt);
    // interpolation error grows like h^2/dist toward P; compare on a region
    // at fixed distance from it
    double worst = 0;
    for (const auto& n : f.nodes) {
      if (dist_to_slit(n.x.xn, n.x.s) < 0.2) continue;
      worst = std::max(worst, std::fabs(n.w.mid() / eps - phi(n.x)));
    }
    errs.push_back(worst);
  }
  CHECK(errs.back() < 5e-3);
  CHECK(fit_loglog_slope(hs, errs) > 1.7);
}

TEST_CASE("laplacian expansion of the inverse transform") {
  // Delta phi_eps = eps Delta(U_n phi) + O(eps^2) away from P
  auto phi = [](const Point& p) { return 1.0 + 0.5 * p.xn - 0.2 * p.s * p.s; };
  std::vector<Point> probes{Point::plane(0.45, 0.35), Point::plane(-0.25, 0.55),
                            Point::plane(0.3, -0.5)};
  std::vector<double> eps_list{0.04, 0.02, 0.01}, residuals;
  double h_fd = 4e-3;
  for (double eps : eps_list) {
    auto pe = [&](const Point& y) { return inverse_hodograph_eval(phi, eps, y); };
    auto unphi = [&](const Point& y) { return U_t(y.xn, y.s) * phi(y); };
    double worst = 0;
    for (const Point& p : probes) {
      double lhs = laplacian_fd4(pe, p, h_fd);
      double rhs = eps * laplacian_fd4(unphi, p, h_fd);
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
    residuals.push_back(worst);
  }
  CHECK(fit_loglog_slope(eps_list, residuals) > 1.8);
}

TEST_CASE("measure_flatness on exact profiles") {
  Grid g = plane_grid(1.0 / 32, 1.0, 1.0);
  auto u = [](const Point& p) { return eval_U(p.xn, p.s); };
  FlatnessReport r0 = measure_flatness(u, g, origin(0), 0.8);
  CHECK(r0.eps == 0.0);

  auto ut = [](const Point& p) { return eval_U(p.xn + 0.03, p.s); };
  FlatnessReport rt = measure_flatness(ut, g, origin(0), 0.8);
  CHECK(rt.eps == Catch::Approx(0.03).margin(1e-6));

  auto below = [](const Point& p) { return eval_U(p.xn - 0.6, p.s); };
  CHECK_THROWS_AS(measure_flatness(below, g, origin(0), 0.8), Error);
}

TEST_CASE("barriers satisfy the 4 delta flatness bound") {
  Rng rng(55);
  Grid g = snapped_grid(2, 1.0 / 16, 1.1, 1.1);
  for (double delta : {0.04, 0.08}) {
    BarrierParams v = BarrierParams::planar(1);
    v.surface.M.at(0, 0) = rng.uniform(-delta, delta);
    v.surface.xi[0] = rng.uniform(-delta, delta);
    v.a = rng.uniform(-delta, delta);
    v.b = rng.uniform(-delta, delta);
    auto ev = [&](const Point& p) { return eval_V(v, p); };
    FlatnessReport r = measure_flatness(ev, g, origin(1), 1.0);
    CHECK(r.eps <= 4 * delta + 2 * g.h);
  }
}

TEST_CASE("ordering transfer audit") {
  Grid g = plane_grid(0.12);
  auto u = [](const Point& p) { return eval_U(p.xn, p.s); };
  double eps = 0.05;
  auto ut = [&](const Point& p) { return eval_U(p.xn + eps, p.s); };

  CHECK(ordering_transfer_check(u, u, g, 1.0, eps));
  CHECK(ordering_transfer_check(u, ut, g, 1.0, eps));

  BarrierParams v = BarrierParams::planar(0, 0.05, 0.02);
  auto vb = [&](const Point& p) { return eval_V(v, p); };
  auto vbs = [&](const Point& p) { return eval_V(v, p.shifted_en(0.01)); };
  CHECK(ordering_transfer_check(vb, vbs, g, 1.0, eps));
}
