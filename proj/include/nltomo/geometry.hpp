#pragma once

#include <Eigen/Core>
#include <complex>
#include <span>
#include <utility>
#include <vector>

namespace nltomo {

using Point = Eigen::Vector2d;
using cplx = std::complex<double>;

namespace geometry {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gaussLegendre(int n);

/// Closed star-shaped curve q(t) = center + r(t) (cos t, sin t) with
/// r(t) = a0 + sum_k (a_k cos kt + b_k sin kt).
struct StarCurve {
  Point center = Point::Zero();
  double a0 = 1.0;
  std::vector<double> a;  // a_1 .. a_K
  std::vector<double> b;  // b_1 .. b_K

  static StarCurve circle(const Point& c, double radius, int order = 0);
  /// Packed layout [a0, a1..aK, b1..bK].
  static StarCurve fromCoefficients(const Point& c, std::span<const double> coeffs);

  int order() const { return static_cast<int>(a.size()); }
  std::vector<double> coefficients() const;

  double radius(double t) const;
  double radiusDerivative(double t) const;
  Point point(double t) const;
  /// dq/dt
  Point tangent(double t) const;

  /// Minimum of r(t) on an equispaced grid of `samples` points.
  double minRadius(int samples = 1024) const;
  double maxRadius(int samples = 1024) const;
  /// Throws InvalidCurveError when r(t) <= 0 somewhere on the check grid.
  void validate(int samples = 1024) const;
};

struct Disc {
  Point center = Point::Zero();
  double radius = 1.0;
};

struct InclusionSet {
  std::vector<StarCurve> objects;
  int radial_order = 32;
  int angular_order = 64;
};

struct QuadNode {
  Point node;
  double weight;
  int object;
};

bool containsPoint(const StarCurve& c, const Point& x);

struct AreaCentroid {
  double area;
  Point centroid;
};
AreaCentroid areaCentroid(const StarCurve& c);

/// Polar tensor rule (radial Gauss-Legendre x angular trapezoid) for one curve.
std::vector<QuadNode> interiorQuadrature(const StarCurve& c, int radial_order,
                                         int angular_order, int object_id = 0);
std::vector<QuadNode> interiorQuadrature(const InclusionSet& s);

struct DiscGroup {
  int object;
  std::vector<int> members;
};
/// Connected components of the disc intersection graph (tangent discs merge).
std::vector<DiscGroup> mergeDiscs(std::span<const Disc> discs);

/// Starting circle for one object: centre at the area-weighted centroid of the
/// member discs, radius from the object's summed weight.
StarCurve initialCurveFromDiscs(std::span<const Disc> members, cplx total_weight,
                                cplx f_centroid, double kappa, int order = 0);

/// Parameter intervals [rho_a, rho_b] of the ray origin + rho * dir (|dir| = 1)
/// with rho in [0, rho_max] that lie inside the curve.
std::vector<std::pair<double, double>> rayIntervals(const StarCurve& c, const Point& origin,
                                                    const Point& dir, double rho_max,
                                                    int samples = 64);

/// Pairs of objects whose boundaries intrude into each other.
std::vector<std::pair<int, int>> overlappingObjects(const InclusionSet& s, int samples = 256);

/// Area of the symmetric difference of two curves, integrated along rays from
/// the centre of `reference`.
double symmetricDifferenceArea(const StarCurve& reference, const StarCurve& other,
                               int rays = 2048);

/// Relative L2 distance between radial functions seen from the reference centre
/// (outermost crossing of `other` along each ray), minimised over a rotation
/// about that centre.
double radialL2Error(const StarCurve& reference, const StarCurve& other, int samples = 512);

}  // namespace geometry
}  // namespace nltomo
