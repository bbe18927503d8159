#include <cmath>

#include "doctest.h"
#include "nltomo/eqdiscs.hpp"
#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

using namespace nltomo;
using namespace nltomo::eqdiscs;
using specfun::kPi;

TEST_CASE("disc weight") {
  const double kappa = 10.0;
  CHECK(std::abs(weightFromRadius(1e-9, kappa, 1.0)) < 1e-15);
  SUBCASE("closed form against the ball integral of plane waves") {
    // int_B kappa^2 f w dx / w(x0) with polar Gauss quadrature.
    const double r = 0.1;
    const Point x0(0.2, -0.1);
    const auto g = geometry::gaussLegendre(40);
    for (double phi : {0.0, 1.1, 2.5}) {
      const Point d(std::cos(phi), std::sin(phi));
      auto w = [&](const Point& x) { return std::exp(cplx(0, kappa * d.dot(x))); };
      cplx acc = 0.0;
      const int nt = 64;
      for (int j = 0; j < nt; ++j) {
        const double t = 2 * kPi * j / nt;
        for (int i = 0; i < 40; ++i) {
          const double s = 0.5 * r * (g.nodes[i] + 1.0);
          acc += w(x0 + s * Point(std::cos(t), std::sin(t))) * s * 0.5 * r * g.weights[i] *
                 (2 * kPi / nt);
        }
      }
      const cplx ratio = kappa * kappa * acc / w(x0);
      const cplx lam = weightFromRadius(r, kappa, 1.0);
      CHECK(std::abs(ratio - lam) < 1e-8 * std::abs(lam));
      CHECK(std::abs(lam - 2 * kPi * 10 * 0.1 * std::cyl_bessel_j(1.0, 1.0)) < 1e-12);
    }
  }
  SUBCASE("linear in f") {
    const cplx f(0.3, -1.2);
    CHECK(std::abs(weightFromRadius(0.13, kappa, 2.0 * f) - 2.0 * weightFromRadius(0.13, kappa, f)) <
          1e-14);
  }
  CHECK_THROWS_AS(weightFromRadius(0.0, kappa, 1.0), DomainError);
}

TEST_CASE("radius from weight") {
  const double kappa = 10.0;
  const cplx f(0.4, 0.3);
  for (double z : {0.2, 1.0, 2.0}) {
    const double r = z / kappa;
    const double lam = std::abs(weightFromRadius(r, kappa, f));
    const double back = radiusFromWeight({lam, kappa * kappa * std::abs(f), kappa});
    CHECK(std::fabs(back - r) < 1e-10);
  }
  SUBCASE("stronger source, same weight, smaller disc") {
    const double lam = 0.05;
    CHECK(radiusFromWeight({lam, 200.0, kappa}) < radiusFromWeight({lam, 100.0, kappa}));
  }
  SUBCASE("branch limits") {
    CHECK_THROWS_AS(radiusFromWeight({0.0, 100.0, kappa}), DomainError);
    const double top = branchMaximum(100.0, kappa);
    // z J1(z) is flat at j01, so roundoff in the weight costs sqrt(eps) in r.
    CHECK(radiusFromWeight({top, 100.0, kappa}) ==
          doctest::Approx(kJ0FirstZero / kappa).epsilon(1e-6));
    try {
      radiusFromWeight({1.5 * top, 100.0, kappa});
      FAIL("expected an out-of-branch error");
    } catch (const OutOfBranchError& e) {
      CHECK(e.attainable_max == doctest::Approx(top));
      CHECK(e.kind() == "out_of_branch");
    }
  }
}

TEST_CASE("starting guesses") {
  const double kappa = 10.0;
  const cplx f0(0.8, -0.3);
  auto constant = [&](const Point&) { return f0; };
  SUBCASE("one source of an exact disc") {
    forward::DiscreteMeasure mu;
    mu.add(Point(0.3, 0.1), weightFromRadius(0.16, kappa, f0));
    const auto g = buildStartingGuesses(mu, constant, kappa);
    REQUIRE(g.curves.size() == 1);
    CHECK(std::fabs(g.curves[0].a0 - 0.16) < 1e-3);
    CHECK((g.curves[0].center - Point(0.3, 0.1)).norm() < 1e-12);
    CHECK(g.curves[0].order() == 4);
  }
  SUBCASE("three separated sources give three objects") {
    forward::DiscreteMeasure mu;
    mu.add(Point(0.4, 0.3), 0.02);
    mu.add(Point(-0.4, 0.3), 0.02);
    mu.add(Point(0.0, -0.5), 0.02);
    const auto g = buildStartingGuesses(mu, constant, kappa);
    CHECK(g.curves.size() == 3);
    CHECK(g.object_weights.size() == 3);
  }
  SUBCASE("touching discs merge and keep the summed weight") {
    forward::DiscreteMeasure mu;
    mu.add(Point(0.0, 0.0), weightFromRadius(0.1, kappa, f0));
    mu.add(Point(0.15, 0.0), weightFromRadius(0.1, kappa, f0));
    const auto g = buildStartingGuesses(mu, constant, kappa);
    REQUIRE(g.curves.size() == 1);
    CHECK(std::abs(g.object_weights[0] - 2.0 * weightFromRadius(0.1, kappa, f0)) < 1e-12);
    CHECK(g.curves[0].center.x() == doctest::Approx(0.075));
    CHECK(std::abs(weightFromRadius(g.curves[0].a0, kappa, f0) - g.object_weights[0]) < 1e-10);
  }
  SUBCASE("oversized weight") {
    forward::DiscreteMeasure mu;
    mu.add(Point(0.0, 0.0), 10.0 * branchMaximum(kappa * kappa * std::abs(f0), kappa));
    CHECK_THROWS_AS(buildStartingGuesses(mu, constant, kappa), OutOfBranchError);
    StartingGuessOptions o;
    o.clamp_to_branch = true;
    const auto g = buildStartingGuesses(mu, constant, kappa, o);
    CHECK(g.clamped[0]);
    CHECK(g.curves[0].a0 == doctest::Approx(kJ0FirstZero / kappa).epsilon(1e-6));
  }
  CHECK_THROWS_AS(buildStartingGuesses({}, constant, kappa), DomainError);
}

TEST_CASE("object weight of a star curve uses its mean radius") {
  geometry::StarCurve c = geometry::StarCurve::circle(Point(0.1, 0.2), 0.15, 3);
  c.a[1] = 0.02;
  const cplx w = objectWeight(c, [](const Point& y) { return cplx(1.0 + y.x(), 0.0); }, 10.0);
  const Point cen = geometry::areaCentroid(c).centroid;
  CHECK(std::abs(w - weightFromRadius(0.15, 10.0, 1.0 + cen.x())) < 1e-14);
}
