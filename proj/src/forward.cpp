#include "nltomo/forward.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::forward {

using geometry::InclusionSet;
using geometry::QuadNode;
using geometry::StarCurve;
using specfun::kEulerGamma;
using specfun::kPi;

namespace {

constexpr cplx kI(0.0, 1.0);

// Distance below which a target counts as sitting on a point source.
constexpr double kCoincidence = 1e-12;

}  // namespace

cplx fundamentalSolution(double kappa, const Point& x, const Point& y) {
  const double r = (x - y).norm();
  if (r < kCoincidence) throw SingularityError("fundamental solution evaluated at its source");
  return -0.25 * kI * specfun::hankel0Fast(kappa * r);
}

void DomainConfig::validate() const {
  if (!(domain_radius > 0.0)) throw ConfigError("domain radius must be positive");
  if (!(omega > 0.0) || !(sound_speed > 0.0)) {
    throw ConfigError("omega and sound speed must be positive");
  }
  if (boundary_nodes < 64 || boundary_nodes % 2 != 0) {
    throw ConfigError("boundary node count must be even and at least 64");
  }
  if (target_radial < 1 || target_angular < 3 || cross_radial < 1 || cross_angular < 3 ||
      singular_rays < 3 || singular_radial < 1 || upsample < 1) {
    throw ConfigError("quadrature orders must be positive");
  }
}

DomainConfig DomainConfig::refined(int factor) const {
  DomainConfig c = *this;
  c.boundary_nodes *= factor;
  c.target_radial *= factor;
  c.target_angular *= factor;
  c.cross_radial *= factor;
  c.cross_angular *= factor;
  c.singular_rays *= factor;
  c.singular_radial *= factor;
  return c;
}

// ---------------------------------------------------------------------------
// Boundary integral solver

BoundarySolver::BoundarySolver(double kappa, double radius, int nodes, int upsample)
    : kappa_(kappa), radius_(radius), n_(nodes), upsample_(upsample) {
  if (!(kappa > 0.0)) throw DomainError("wave number must be positive");
  if (nodes < 8 || nodes % 2 != 0) throw DomainError("boundary node count must be even");
  const int half = n_ / 2;
  nodes_.resize(n_);
  angles_.resize(n_);
  for (int j = 0; j < n_; ++j) {
    angles_[j] = kPi * j / half;
    nodes_[j] = radius_ * Point(std::cos(angles_[j]), std::sin(angles_[j]));
  }

  // Log-product weights R_k for the periodic kernel ln(4 sin^2((t - tau)/2)).
  std::vector<double> rw(n_);
  for (int k = 0; k < n_; ++k) {
    const double t = kPi * k / half;
    double acc = 0.0;
    for (int m = 1; m < half; ++m) acc += std::cos(m * t) / m;
    rw[k] = -2.0 * kPi / half * acc - kPi / (double(half) * half) * std::cos(half * t);
  }

  MatrixXcd S(n_, n_), Kp(n_, n_);
  const double h = kPi / half;
  const cplx s_diag = 0.25 * kI - (kEulerGamma + std::log(0.5 * kappa_ * radius_)) / (2.0 * kPi);
  const double k_diag = -1.0 / (4.0 * kPi * radius_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      const double w = rw[std::abs(i - j)];
      if (i == j) {
        S(i, j) = w * (-1.0 / (4.0 * kPi)) + h * s_diag;
        Kp(i, j) = h * k_diag;
        continue;
      }
      const double sn = std::sin(0.5 * (angles_[i] - angles_[j]));
      const double r = 2.0 * radius_ * std::fabs(sn);
      const double lg = std::log(4.0 * sn * sn);
      const auto hk = specfun::hankel01Fast(kappa_ * r);
      const double m1 = -hk.h0.real() / (4.0 * kPi);
      const cplx m = 0.25 * kI * hk.h0;
      S(i, j) = w * m1 + h * (m - m1 * lg);
      const double geom = r / (2.0 * radius_);
      const double l1 = kappa_ / (4.0 * kPi) * hk.h1.real() * geom;
      const cplx l = -0.25 * kI * kappa_ * hk.h1 * geom;
      Kp(i, j) = w * l1 + h * (l - l1 * lg);
    }
  }
  single_layer_ = S;
  MatrixXcd A = Kp + kI * kappa_ * S;
  A.diagonal().array() += 0.5 / radius_;

  lu_.compute(A);
  cond_ = 1.0 / lu_.rcond();  // 1-norm estimate
  if (!(cond_ < 1e12)) {
    throw SolverError("impedance boundary system ill-conditioned (cond " +
                      std::to_string(cond_) + ") near resonance at kappa " +
                      std::to_string(kappa_));
  }
  impedance_to_dirichlet_ = S * lu_.inverse();

  // Trigonometric interpolation to the fine grid (Dirichlet kernel, Nyquist halved).
  const int nf = n_ * upsample_;
  fine_nodes_.resize(nf);
  upsampler_.resize(nf, n_);
  for (int i = 0; i < nf; ++i) {
    const double t = 2.0 * kPi * i / nf;
    fine_nodes_[i] = radius_ * Point(std::cos(t), std::sin(t));
    for (int j = 0; j < n_; ++j) {
      // sum_{|m| < n/2} e^{imd} + cos(n d / 2) in closed form
      const double d = t - angles_[j];
      const double sh = std::sin(0.5 * d);
      const double core = std::fabs(sh) < 1e-14 ? 2.0 * half - 1.0
                                                : std::sin((half - 0.5) * d) / sh;
      upsampler_(i, j) = (core + std::cos(half * d)) / n_;
    }
  }
}

std::shared_ptr<const BoundarySolver> BoundarySolver::cached(double kappa, double radius,
                                                             int nodes, int upsample) {
  using Key = std::tuple<double, double, int, int>;
  static std::mutex mtx;
  static std::map<Key, std::shared_ptr<const BoundarySolver>> cache;
  const Key key{kappa, radius, nodes, upsample};
  {
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto solver = std::make_shared<const BoundarySolver>(kappa, radius, nodes, upsample);
  std::lock_guard<std::mutex> lock(mtx);
  return cache.emplace(key, solver).first->second;
}

double BoundarySolver::nodeWeight() const { return 2.0 * kPi * radius_ / n_; }

VectorXcd BoundarySolver::density(const VectorXcd& g) const { return lu_.solve(g); }

VectorXcd BoundarySolver::boundaryValues(const VectorXcd& psi) const {
  return single_layer_ * psi;
}

VectorXcd BoundarySolver::interiorValues(const VectorXcd& psi,
                                         const std::vector<Point>& x) const {
  const VectorXcd fine = upsampler_.cast<cplx>() * psi;
  const double w = 2.0 * kPi / fine.size();
  VectorXcd out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i].norm() < radius_)) throw DomainError("interior evaluation outside the domain");
    cplx acc = 0.0;
    for (Eigen::Index j = 0; j < fine.size(); ++j) {
      acc += specfun::hankel0Fast(kappa_ * (x[i] - fine_nodes_[j]).norm()) * fine(j);
    }
    out(i) = 0.25 * kI * w * acc;
  }
  return out;
}

VectorXcd BoundarySolver::totalDirichlet(const FreeTraces& free) const {
  const VectorXcd g = -free.flux - kI * kappa_ * free.dirichlet;
  return free.dirichlet + impedance_to_dirichlet_ * g;
}

// ---------------------------------------------------------------------------
// Free-space fields

FreeTraces freeSpaceTraces(const DiscreteMeasure& mu, double kappa, const BoundarySolver& bs) {
  const int n = bs.size();
  FreeTraces out{VectorXcd::Zero(n), VectorXcd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    const Point& x = bs.nodes()[i];
    const Point nu = bs.normal(i);
    cplx v = 0.0, f = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const Point d = x - mu.points[k];
      const double r = d.norm();
      if (r < kCoincidence) throw SingularityError("point source on the boundary");
      const auto h = specfun::hankel01Fast(kappa * r);
      v += mu.weights[k] * h.h0;
      f += mu.weights[k] * h.h1 * (d.dot(nu) / r);
    }
    out.dirichlet(i) = -0.25 * kI * v;
    out.flux(i) = 0.25 * kI * kappa * f;
  }
  return out;
}

VectorXcd freeSpaceField(const DiscreteMeasure& mu, double kappa, const std::vector<Point>& x) {
  VectorXcd out = VectorXcd::Zero(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    cplx v = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
      const double r = (x[i] - mu.points[k]).norm();
      if (r < kCoincidence) throw SingularityError("field evaluated at a point source");
      v += mu.weights[k] * specfun::hankel0Fast(kappa * r);
    }
    out(i) = -0.25 * kI * v;
  }
  return out;
}

DiscreteMeasure volumeSource(const std::vector<QuadNode>& rule,
                             const std::function<cplx(const Point&)>& f, double kappa) {
  DiscreteMeasure mu;
  mu.points.reserve(rule.size());
  mu.weights.reserve(rule.size());
  for (const QuadNode& q : rule) mu.add(q.node, q.weight * kappa * kappa * f(q.node));
  return mu;
}

namespace {

// int_{D_c} density(y) Phi(x, y) dy for x inside D_c, by rays from x.
cplx ownObjectPotential(const StarCurve& c, double c_maxr,
                        const std::function<cplx(const Point&)>& density, double kappa,
                        const Point& x, int rays, const geometry::GaussRule& g) {
  const double rho_max = (x - c.center).norm() + 1.05 * c_maxr;
  const double dth = 2.0 * kPi / rays;
  cplx acc = 0.0;
  for (int k = 0; k < rays; ++k) {
    const double th = dth * (k + 0.5);
    const Point dir(std::cos(th), std::sin(th));
    const auto iv = geometry::rayIntervals(c, x, dir, rho_max, 24);
    for (const auto& [a, b] : iv) {
      for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const double s = 0.5 * (g.nodes[i] + 1.0);
        const double w = 0.5 * g.weights[i];
        double rho, jac;
        if (a == 0.0) {
          // rho = b s^2 removes the rho log(rho) kink at the target
          rho = b * s * s;
          jac = 2.0 * b * s;
        } else {
          rho = a + (b - a) * s;
          jac = b - a;
        }
        acc += w * jac * rho * density(x + rho * dir) *
               specfun::hankel0Fast(kappa * rho);
      }
    }
  }
  return -0.25 * kI * dth * acc;
}

}  // namespace

VectorXcd volumePotential(const InclusionSet& s,
                          const std::function<cplx(const Point&)>& density, double kappa,
                          const std::vector<Point>& targets, const DomainConfig& cfg) {
  const auto g = geometry::gaussLegendre(cfg.singular_radial);
  VectorXcd out = VectorXcd::Zero(targets.size());
  for (std::size_t l = 0; l < s.objects.size(); ++l) {
    const StarCurve& c = s.objects[l];
    const double maxr = c.maxRadius();
    const auto cross = volumeSource(
        geometry::interiorQuadrature(c, cfg.cross_radial, cfg.cross_angular), density, 1.0);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (geometry::containsPoint(c, targets[i])) {
        out(i) += ownObjectPotential(c, maxr, density, kappa, targets[i], cfg.singular_rays, g);
      } else {
        cplx v = 0.0;
        for (std::size_t k = 0; k < cross.size(); ++k) {
          const double r = (targets[i] - cross.points[k]).norm();
          if (r < kCoincidence) continue;  // boundary target meeting a node: skip
          v += cross.weights[k] * specfun::hankel0Fast(kappa * r);
        }
        out(i) += -0.25 * kI * v;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Source problems

HarmonicField impedanceCorrection(const FreeTraces& free, double kappa, const DomainConfig& cfg,
                                  const std::vector<Point>& eval) {
  cfg.validate();
  const auto bs = BoundarySolver::cached(kappa, cfg.domain_radius, cfg.boundary_nodes,
                                         cfg.upsample);
  HarmonicField h;
  h.kappa = kappa;
  h.boundary_angles = bs->angles();
  const VectorXcd g = -free.flux - kI * kappa * free.dirichlet;
  h.density = bs->density(g);
  h.dirichlet = bs->boundaryValues(h.density);
  h.neumann = g - kI * kappa * h.dirichlet;
  h.nodes = eval;
  h.values = eval.empty() ? VectorXcd() : bs->interiorValues(h.density, eval);
  return h;
}

HarmonicField solveSourceProblem(const DiscreteMeasure& mu, double kappa,
                                 const DomainConfig& cfg, const std::vector<Point>& eval) {
  cfg.validate();
  const auto bs = BoundarySolver::cached(kappa, cfg.domain_radius, cfg.boundary_nodes,
                                         cfg.upsample);
  for (const Point& p : mu.points) {
    if (!(p.norm() < cfg.domain_radius)) throw DomainError("point source outside the domain");
  }
  const FreeTraces free = freeSpaceTraces(mu, kappa, *bs);
  HarmonicField h = impedanceCorrection(free, kappa, cfg, eval);
  h.dirichlet += free.dirichlet;
  h.neumann += free.flux;
  if (!eval.empty()) h.values += freeSpaceField(mu, kappa, eval);
  return h;
}

HarmonicField solveSourceProblem(const InclusionSet& s,
                                 const std::function<cplx(const Point&)>& f, double kappa,
                                 const DomainConfig& cfg, const std::vector<Point>& eval) {
  const DiscreteMeasure mu = volumeSource(geometry::interiorQuadrature(s), f, kappa);
  HarmonicField h = solveSourceProblem(mu, kappa, cfg);
  if (!eval.empty()) {
    const auto bs = BoundarySolver::cached(kappa, cfg.domain_radius, cfg.boundary_nodes,
                                           cfg.upsample);
    h.nodes = eval;
    auto density = [&](const Point& y) { return kappa * kappa * f(y); };
    h.values = volumePotential(s, density, kappa, eval, cfg) + bs->interiorValues(h.density, eval);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Harmonic cascade

Cascade::Cascade(DomainConfig cfg, Excitation exc) : cfg_(cfg), exc_(std::move(exc)) {
  cfg_.validate();
  solvers_.resize(4);
  for (int m = 1; m <= 3; ++m) {
    solvers_[m] = BoundarySolver::cached(cfg_.kappa(m), cfg_.domain_radius,
                                         cfg_.boundary_nodes, cfg_.upsample);
  }
  if (exc_.kind == Excitation::Kind::Sources) {
    fundamental_ = solveSourceProblem(exc_.sources, cfg_.kappa(1), cfg_);
  }
}

const BoundarySolver& Cascade::solver(int m) const {
  if (m < 1 || m > 3) throw DomainError("harmonic index must be 1, 2 or 3");
  return *solvers_[m];
}

cplx Cascade::incident(const Point& y) const {
  if (exc_.kind == Excitation::Kind::PlaneWave) {
    const Point d = exc_.direction.normalized();
    return exc_.amplitude * std::exp(kI * cfg_.kappa1() * d.dot(y));
  }
  const std::vector<Point> pts{y};
  return freeSpaceField(exc_.sources, cfg_.kappa1(), pts)(0) +
         solvers_[1]->interiorValues(fundamental_.density, pts)(0);
}

cplx Cascade::secondHarmonicSource(const Point& y) const {
  const cplx p1 = incident(y);
  return 0.25 * cfg_.eta0 * p1 * p1;
}

FreeTraces Cascade::secondHarmonicFreeTraces(const StarCurve& c, int radial, int angular) const {
  const double k2 = cfg_.kappa(2);
  const auto mu = volumeSource(geometry::interiorQuadrature(c, radial, angular),
                               [this](const Point& y) { return secondHarmonicSource(y); }, k2);
  return freeSpaceTraces(mu, k2, *solvers_[2]);
}

HarmonicField Cascade::complete(int m, const FreeTraces& free, bool keep_density) const {
  const BoundarySolver& bs = solver(m);
  HarmonicField h;
  h.harmonic = m;
  h.kappa = cfg_.kappa(m);
  h.boundary_angles = bs.angles();
  if (keep_density) {
    const VectorXcd g = -free.flux - kI * h.kappa * free.dirichlet;
    h.density = bs.density(g);
    h.dirichlet = free.dirichlet + bs.boundaryValues(h.density);
  } else {
    h.dirichlet = bs.totalDirichlet(free);
  }
  h.neumann = -kI * h.kappa * h.dirichlet;
  return h;
}

VectorXcd Cascade::secondHarmonicAt(const InclusionSet& s, const VectorXcd& psi2,
                                    const std::vector<Point>& targets) const {
  const double k2 = cfg_.kappa(2);
  auto density = [this, k2](const Point& y) { return k2 * k2 * secondHarmonicSource(y); };
  VectorXcd out = volumePotential(s, density, k2, targets, cfg_);
  if (psi2.size() > 0) out += solvers_[2]->interiorValues(psi2, targets);
  return out;
}

FreeTraces Cascade::thirdHarmonicFreeTraces(const InclusionSet& s, const VectorXcd& psi2) const {
  const double k3 = cfg_.kappa(3);
  std::vector<QuadNode> rule;
  for (std::size_t l = 0; l < s.objects.size(); ++l) {
    auto part = geometry::interiorQuadrature(s.objects[l], cfg_.target_radial,
                                             cfg_.target_angular, static_cast<int>(l));
    rule.insert(rule.end(), part.begin(), part.end());
  }
  std::vector<Point> pts(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) pts[q] = rule[q].node;
  const VectorXcd p2 = secondHarmonicAt(s, psi2, pts);
  DiscreteMeasure mu;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const cplx f3 = 0.25 * cfg_.eta0 * 2.0 * incident(pts[q]) * p2(q);
    mu.add(pts[q], rule[q].weight * k3 * k3 * f3);
  }
  return freeSpaceTraces(mu, k3, *solvers_[3]);
}

std::vector<HarmonicField> Cascade::run(const InclusionSet& s, int M,
                                        const std::vector<Point>& eval) const {
  if (M < 1 || M > 3) throw DomainError("harmonic count must be 1, 2 or 3");
  for (const auto& c : s.objects) {
    c.validate();
    if (!(c.center.norm() + c.maxRadius() < cfg_.domain_radius)) {
      throw DomainError("inclusion not strictly inside the domain");
    }
  }
  std::vector<HarmonicField> out;
  {
    HarmonicField h1;
    h1.harmonic = 1;
    h1.kappa = cfg_.kappa(1);
    h1.boundary_angles = solvers_[1]->angles();
    const int n = solvers_[1]->size();
    if (exc_.kind == Excitation::Kind::PlaneWave) {
      h1.dirichlet.resize(n);
      h1.neumann.resize(n);
      const Point d = exc_.direction.normalized();
      for (int i = 0; i < n; ++i) {
        const cplx v = incident(solvers_[1]->nodes()[i]);
        h1.dirichlet(i) = v;
        h1.neumann(i) = kI * cfg_.kappa1() * d.dot(solvers_[1]->normal(i)) * v;
      }
    } else {
      h1.dirichlet = fundamental_.dirichlet;
      h1.neumann = fundamental_.neumann;
    }
    h1.nodes = eval;
    h1.values.resize(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) h1.values(i) = incident(eval[i]);
    out.push_back(std::move(h1));
  }
  if (M == 1) return out;

  const int n = cfg_.boundary_nodes;
  FreeTraces free2{VectorXcd::Zero(n), VectorXcd::Zero(n)};
  for (const auto& c : s.objects) {
    const FreeTraces t = secondHarmonicFreeTraces(c, s.radial_order, s.angular_order);
    free2.dirichlet += t.dirichlet;
    free2.flux += t.flux;
  }
  HarmonicField h2 = complete(2, free2, true);
  if (!eval.empty()) {
    h2.nodes = eval;
    h2.values = secondHarmonicAt(s, h2.density, eval);
  }
  if (M == 3) {
    HarmonicField h3 = complete(3, thirdHarmonicFreeTraces(s, h2.density), !eval.empty());
    if (!eval.empty()) {
      // Interior values of the third harmonic use the coarse node rule and are
      // only reliable away from D.
      std::vector<QuadNode> rule;
      for (const auto& c : s.objects) {
        auto part = geometry::interiorQuadrature(c, cfg_.target_radial, cfg_.target_angular);
        rule.insert(rule.end(), part.begin(), part.end());
      }
      std::vector<Point> pts(rule.size());
      for (std::size_t q = 0; q < rule.size(); ++q) pts[q] = rule[q].node;
      const VectorXcd p2 = secondHarmonicAt(s, h2.density, pts);
      DiscreteMeasure mu;
      const double k3 = cfg_.kappa(3);
      for (std::size_t q = 0; q < rule.size(); ++q) {
        mu.add(pts[q], rule[q].weight * k3 * k3 * 0.5 * cfg_.eta0 * incident(pts[q]) * p2(q));
      }
      h3.nodes = eval;
      VectorXcd v(eval.size());
      for (std::size_t i = 0; i < eval.size(); ++i) {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
          const double r = (eval[i] - mu.points[k]).norm();
          if (r > kCoincidence) acc += mu.weights[k] * specfun::hankel0Fast(k3 * r);
        }
        v(i) = -0.25 * kI * acc;
      }
      h3.values = v + solvers_[3]->interiorValues(h3.density, eval);
    }
    out.push_back(std::move(h2));
    out.push_back(std::move(h3));
  } else {
    out.push_back(std::move(h2));
  }
  return out;
}

std::vector<HarmonicField> harmonicCascade(const DomainConfig& cfg, const InclusionSet& incl,
                                           const Excitation& exc, int M,
                                           const std::vector<Point>& eval) {
  return Cascade(cfg, exc).run(incl, M, eval);
}

// ---------------------------------------------------------------------------
// Traces

double BoundaryTrace::l2Norm() const { return std::sqrt(node_weight) * samples.norm(); }

std::vector<int> arcIndices(const std::vector<double>& angles, double arc_fraction,
                            double arc_center) {
  if (!(arc_fraction > 0.0 && arc_fraction <= 1.0)) {
    throw DomainError("arc fraction must lie in (0, 1]");
  }
  std::vector<int> idx;
  const double half = kPi * arc_fraction;
  for (std::size_t j = 0; j < angles.size(); ++j) {
    double d = std::remainder(angles[j] - arc_center, 2.0 * kPi);  // in [-pi, pi]
    if (d >= kPi - 1e-12) d -= 2.0 * kPi;
    if (arc_fraction == 1.0 || (d >= -half - 1e-12 && d < half - 1e-12)) {
      idx.push_back(static_cast<int>(j));
    }
  }
  return idx;
}

BoundaryTrace extractTrace(const HarmonicField& field, double arc_fraction, TraceKind kind,
                           double arc_center, double domain_radius) {
  BoundaryTrace t;
  t.harmonic = field.harmonic;
  t.kind = kind;
  t.arc_fraction = arc_fraction;
  t.arc_center = arc_center;
  t.domain_radius = domain_radius;
  const auto& src = kind == TraceKind::Dirichlet ? field.dirichlet : field.neumann;
  const int n = static_cast<int>(field.boundary_angles.size());
  t.node_weight = 2.0 * kPi * domain_radius / n;
  t.indices = arcIndices(field.boundary_angles, arc_fraction, arc_center);
  t.angles.reserve(t.indices.size());
  t.samples.resize(t.indices.size());
  for (std::size_t k = 0; k < t.indices.size(); ++k) {
    t.angles.push_back(field.boundary_angles[t.indices[k]]);
    t.samples(k) = src(t.indices[k]);
  }
  return t;
}

BoundaryTrace subsampleTrace(const BoundaryTrace& t, int factor) {
  if (factor < 1) throw DomainError("subsampling factor must be positive");
  BoundaryTrace out = t;
  out.indices.clear();
  out.angles.clear();
  std::vector<cplx> kept;
  for (std::size_t i = 0; i < t.indices.size(); ++i) {
    if (t.indices[i] % factor != 0) continue;
    out.indices.push_back(t.indices[i] / factor);
    out.angles.push_back(t.angles[i]);
    kept.push_back(t.samples(static_cast<Eigen::Index>(i)));
  }
  out.samples = Eigen::Map<const VectorXcd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  out.node_weight = t.node_weight * factor;
  return out;
}

BoundaryTrace convertTrace(const BoundaryTrace& t, double kappa1, double gamma) {
  BoundaryTrace out = t;
  const cplx factor = -(kI * (t.harmonic * kappa1) + gamma);
  if (t.kind == TraceKind::Dirichlet) {
    out.kind = TraceKind::Neumann;
    out.samples = factor * t.samples;
  } else {
    out.kind = TraceKind::Dirichlet;
    out.samples = t.samples / factor;
  }
  return out;
}

std::string traceKindName(TraceKind k) {
  return k == TraceKind::Dirichlet ? "dirichlet" : "neumann";
}

}  // namespace nltomo::forward
