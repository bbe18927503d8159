#include <cmath>
#include <random>

#include "doctest.h"
#include "nltomo/error.hpp"
#include "nltomo/pdap.hpp"

using namespace nltomo;
using namespace nltomo::pdap;

namespace {

struct Setup {
  forward::DomainConfig dom;
  std::vector<int> arc;
  FluxOperator op;
  explicit Setup(double fraction = 1.0)
      : arc(forward::arcIndices(
            forward::BoundarySolver::cached(10.0, 1.0, 256)->angles(), fraction, 0.0)),
        op(dom, 10.0, arc) {}
};

DiscreteMeasure randomMeasure(std::mt19937& rng, int n) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  DiscreteMeasure mu;
  for (int k = 0; k < n; ++k) mu.add(Point(u(rng), u(rng)), cplx(u(rng), u(rng)));
  return mu;
}

}  // namespace

TEST_CASE("forward operator") {
  Setup s;
  CHECK(s.op.apply(DiscreteMeasure{}).norm() == 0.0);
  std::mt19937 rng(5);
  const auto a = randomMeasure(rng, 3), b = randomMeasure(rng, 2);
  DiscreteMeasure ab = a;
  for (std::size_t k = 0; k < b.size(); ++k) ab.add(b.points[k], b.weights[k]);
  const VectorXcd fa = s.op.apply(a), fb = s.op.apply(b), fab = s.op.apply(ab);
  CHECK((fab - fa - fb).norm() < 1e-10 * fab.norm());

  DiscreteMeasure centre;
  centre.add(Point(0, 0), 1.0);
  const VectorXcd t = s.op.apply(centre);
  CHECK((t.array() - t(0)).abs().maxCoeff() < 1e-8 * std::abs(t(0)));

  // agrees with the general source solver
  const auto h = forward::solveSourceProblem(a, 10.0, s.dom);
  CHECK((h.neumann - fa).norm() < 1e-12 * fa.norm());
}

TEST_CASE("adjoint consistency") {
  Setup s(0.5);
  std::mt19937 rng(9);
  PdapConfig cfg;
  cfg.grid_radii = 6;
  cfg.grid_angles = 12;
  const auto grid = candidateGrid(cfg, 1.0);
  const MatrixXcd k = s.op.columns(grid);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 5; ++trial) {
    VectorXcd lam(grid.size()), res(s.op.rows());
    for (auto& v : lam) v = cplx(n01(rng), n01(rng));
    for (auto& v : res) v = cplx(n01(rng), n01(rng));
    const VectorXcd flam = k * lam;
    const cplx lhs = s.op.nodeWeight() * flam.dot(res);   // <F mu, res>_{L2(Sigma)}
    const cplx rhs = lam.dot(applyFstar(res, k, s.op.nodeWeight()));  // sum conj(lambda) xi
    CHECK(std::abs(lhs - rhs) < 1e-10 * std::abs(lhs));
  }
  CHECK(applyFstar(VectorXcd::Zero(s.op.rows()), k, s.op.nodeWeight()).norm() == 0.0);
}

TEST_CASE("dual field of a single source peaks at the nearest grid node") {
  Setup s;
  PdapConfig cfg;
  const auto grid = candidateGrid(cfg, 1.0);
  const MatrixXcd k = s.op.columns(grid);
  const int j0 = 48 * 20 + 30;  // a grid node
  const VectorXcd xi = applyFstar(k.col(j0), k, s.op.nodeWeight());
  Eigen::Index arg;
  (xi.cwiseAbs().array() / k.colwise().norm().transpose().array()).maxCoeff(&arg);
  CHECK(arg == j0);
}

TEST_CASE("PDAP recovers separated sources") {
  Setup s;
  DiscreteMeasure truth;
  truth.add(Point(0.31, 0.22), cplx(1.0, 0.3));
  truth.add(Point(-0.42, 0.37), cplx(-0.4, 0.8));
  truth.add(Point(0.07, -0.53), cplx(0.6, -0.5));
  SUBCASE("zero data") {
    const auto st = pdapRun(applyF(DiscreteMeasure{}, s.op), PdapConfig{}, s.op);
    CHECK(st.measure.empty());
  }
  SUBCASE("single source") {
    DiscreteMeasure one;
    one.add(truth.points[0], truth.weights[0]);
    const auto st = pdapRun(applyF(one, s.op), PdapConfig{}, s.op);
    REQUIRE(st.measure.size() == 1);
    CHECK((st.measure.points[0] - one.points[0]).norm() < 1e-6);
    CHECK(std::abs(st.measure.weights[0] - one.weights[0]) < 1e-6 * std::abs(one.weights[0]));
  }
  SUBCASE("three sources") {
    const auto st = pdapRun(applyF(truth, s.op), PdapConfig{}, s.op);
    REQUIRE(st.measure.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < 3; ++j) {
        if ((st.measure.points[j] - truth.points[k]).norm() <
            (st.measure.points[best] - truth.points[k]).norm()) best = j;
      }
      CHECK((st.measure.points[best] - truth.points[k]).norm() < 1e-6);
      CHECK(std::abs(st.measure.weights[best] - truth.weights[k]) < 1e-6 * std::abs(truth.weights[k]));
    }
    for (std::size_t i = 1; i < st.residual_history.size(); ++i) {
      CHECK(st.residual_history[i] < st.residual_history[i - 1]);
    }
  }
}

TEST_CASE("PDAP configuration validation") {
  PdapConfig c;
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PdapConfig{};
  c.tolerance = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
