#pragma once

#include <functional>
#include <vector>

#include "nltomo/forward.hpp"
#include "nltomo/geometry.hpp"

namespace nltomo::eqdiscs {

/// First positive zero of J_0; z J_1(z) increases strictly on (0, j01).
inline constexpr double kJ0FirstZero = 2.404825557695773;

struct WeightToRadiusProblem {
  double weight_magnitude = 0.0;  // |lambda|
  double source_magnitude = 1.0;  // |kappa^2 f(S)|
  double kappa = 1.0;
};

/// Point weight equivalent to a disc of radius r carrying the constant source
/// kappa^2 f: kappa^2 f pi r^2 (2 J_1(kappa r) / (kappa r)).
cplx weightFromRadius(double r, double kappa, cplx f);

/// Largest |lambda| reachable on the monotone branch kappa r < j01.
double branchMaximum(double source_magnitude, double kappa);

/// Inverse of weightFromRadius on the monotone branch, bisection to 1e-12 in r.
/// Throws OutOfBranchError above the branch maximum and DomainError for a zero
/// weight.
double radiusFromWeight(const WeightToRadiusProblem& p);

/// Weight of the disc equivalent to an object: its mean radius a0 with f
/// taken at the area centroid.
cplx objectWeight(const geometry::StarCurve& c, const std::function<cplx(const Point&)>& f,
                  double kappa);

struct StartingGuess {
  std::vector<geometry::Disc> discs;     // one per source
  std::vector<cplx> source_f;            // f at each source
  std::vector<geometry::DiscGroup> groups;
  std::vector<cplx> object_weights;      // phase-aligned summed weight per object
  std::vector<geometry::StarCurve> curves;
  std::vector<bool> clamped;             // per source: weight clipped to the branch maximum
};

struct StartingGuessOptions {
  int order = 4;
  /// Clip weights above the branch maximum instead of throwing.
  bool clamp_to_branch = false;
};

/// One equivalent disc per source, merged into objects; each object gets a
/// circle whose radius matches the object's summed weight referred to f at
/// the object's centroid.
StartingGuess buildStartingGuesses(const forward::DiscreteMeasure& mu,
                                   const std::function<cplx(const Point&)>& f, double kappa,
                                   const StartingGuessOptions& opts = {});

}  // namespace nltomo::eqdiscs
