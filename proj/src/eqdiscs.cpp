#include "nltomo/eqdiscs.hpp"

#include <cmath>

#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::eqdiscs {

using specfun::kPi;

namespace {

// |lambda| / |kappa^2 f| as a function of z = kappa r: pi r^2 2 J1(z)/z = 2 pi z J1(z) / kappa^2.
double normalizedWeight(double z, double kappa) {
  return 2.0 * kPi * z * specfun::besselJ(1, z) / (kappa * kappa);
}

}  // namespace

cplx weightFromRadius(double r, double kappa, cplx f) {
  if (!(r > 0.0)) throw DomainError("weightFromRadius: radius must be positive");
  if (!(kappa > 0.0)) throw DomainError("weightFromRadius: wave number must be positive");
  return f * (2.0 * kPi * kappa * r * specfun::besselJ(1, kappa * r));
}

double branchMaximum(double source_magnitude, double kappa) {
  return source_magnitude * normalizedWeight(kJ0FirstZero, kappa);
}

double radiusFromWeight(const WeightToRadiusProblem& p) {
  if (!(p.kappa > 0.0) || !(p.source_magnitude > 0.0)) {
    throw DomainError("radiusFromWeight: wave number and source magnitude must be positive");
  }
  if (!(p.weight_magnitude > 0.0)) {
    throw DomainError("radiusFromWeight: zero weight has no disc of positive radius");
  }
  const double target = p.weight_magnitude / p.source_magnitude;
  const double top = normalizedWeight(kJ0FirstZero, p.kappa);
  if (target > top) {
    throw OutOfBranchError("weight exceeds the monotone branch of the disc relation",
                           top * p.source_magnitude);
  }
  double lo = 0.0, hi = kJ0FirstZero;
  while ((hi - lo) / p.kappa > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    (normalizedWeight(mid, p.kappa) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi) / p.kappa;
}

cplx objectWeight(const geometry::StarCurve& c, const std::function<cplx(const Point&)>& f,
                  double kappa) {
  return weightFromRadius(c.a0, kappa, f(geometry::areaCentroid(c).centroid));
}

StartingGuess buildStartingGuesses(const forward::DiscreteMeasure& mu,
                                   const std::function<cplx(const Point&)>& f, double kappa,
                                   const StartingGuessOptions& opts) {
  if (mu.empty()) throw DomainError("buildStartingGuesses: empty measure");
  StartingGuess out;
  const double k2 = kappa * kappa;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const cplx fk = f(mu.points[k]);
    WeightToRadiusProblem p{std::abs(mu.weights[k]), k2 * std::abs(fk), kappa};
    bool clamped = false;
    const double top = branchMaximum(p.source_magnitude, kappa);
    if (opts.clamp_to_branch && p.weight_magnitude > top) {
      p.weight_magnitude = top;
      clamped = true;
    }
    out.discs.push_back({mu.points[k], radiusFromWeight(p)});
    out.source_f.push_back(fk);
    out.clamped.push_back(clamped);
  }
  out.groups = geometry::mergeDiscs(out.discs);
  for (const auto& g : out.groups) {
    std::vector<geometry::Disc> members;
    for (int i : g.members) members.push_back(out.discs[i]);
    double area = 0.0;
    Point c = Point::Zero();
    for (const auto& d : members) {
      area += d.radius * d.radius;
      c += d.radius * d.radius * d.center;
    }
    c /= area;
    // Refer every weight to f at the centroid before summing so that the
    // phase of f across the object does not cancel the contributions.
    const cplx fc = f(c);
    cplx total = 0.0;
    for (int i : g.members) total += mu.weights[i] * (fc / out.source_f[i]);
    out.object_weights.push_back(total);
    const double top = branchMaximum(k2 * std::abs(fc), kappa);
    if (opts.clamp_to_branch && std::abs(total) > top) total *= top / std::abs(total);
    out.curves.push_back(geometry::initialCurveFromDiscs(members, total, fc, kappa, opts.order));
  }
  return out;
}

}  // namespace nltomo::eqdiscs
