#include "nltomo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "nltomo/eqdiscs.hpp"
#include "nltomo/error.hpp"
#include "nltomo/specfun.hpp"

namespace nltomo::geometry {

using specfun::kPi;

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

}  // namespace

GaussRule gaussLegendre(int n) {
  if (n < 1) throw DomainError("gaussLegendre: order must be positive");
  GaussRule g{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  if (n == 1) {
    g.weights[0] = 2.0;
    return g;
  }
  for (int i = 0; i < n / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    const double dp = legendre(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.nodes[i] = -x;
    g.nodes[n - 1 - i] = x;
    g.weights[i] = w;
    g.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) {
    const double dp = legendre(n, 0.0).second;
    g.weights[n / 2] = 2.0 / (dp * dp);
  }
  return g;
}

// ---------------------------------------------------------------------------

StarCurve StarCurve::circle(const Point& c, double radius, int order) {
  if (!(radius > 0.0)) throw InvalidCurveError("circle radius must be positive");
  StarCurve s;
  s.center = c;
  s.a0 = radius;
  s.a.assign(order, 0.0);
  s.b.assign(order, 0.0);
  return s;
}

StarCurve StarCurve::fromCoefficients(const Point& c, std::span<const double> coeffs) {
  if (coeffs.empty() || coeffs.size() % 2 == 0) {
    throw InvalidCurveError("coefficient vector must have odd length 1 + 2K");
  }
  const std::size_t k = coeffs.size() / 2;
  StarCurve s;
  s.center = c;
  s.a0 = coeffs[0];
  s.a.assign(coeffs.begin() + 1, coeffs.begin() + 1 + k);
  s.b.assign(coeffs.begin() + 1 + k, coeffs.end());
  return s;
}

std::vector<double> StarCurve::coefficients() const {
  std::vector<double> out;
  out.reserve(1 + a.size() + b.size());
  out.push_back(a0);
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

double StarCurve::radius(double t) const {
  double r = a0;
  const double c1 = std::cos(t), s1 = std::sin(t);
  double ck = c1, sk = s1;
  for (std::size_t k = 0; k < a.size(); ++k) {
    r += a[k] * ck + b[k] * sk;
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
  }
  return r;
}

double StarCurve::radiusDerivative(double t) const {
  double dr = 0.0;
  const double c1 = std::cos(t), s1 = std::sin(t);
  double ck = c1, sk = s1;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dr += (k + 1.0) * (b[k] * ck - a[k] * sk);
    const double cn = ck * c1 - sk * s1;
    sk = sk * c1 + ck * s1;
    ck = cn;
  }
  return dr;
}

Point StarCurve::point(double t) const {
  return center + radius(t) * Point(std::cos(t), std::sin(t));
}

Point StarCurve::tangent(double t) const {
  const double r = radius(t), dr = radiusDerivative(t);
  const double c = std::cos(t), s = std::sin(t);
  return Point(dr * c - r * s, dr * s + r * c);
}

double StarCurve::minRadius(int samples) const {
  double m = radius(0.0);
  for (int j = 1; j < samples; ++j) m = std::min(m, radius(2.0 * kPi * j / samples));
  return m;
}

double StarCurve::maxRadius(int samples) const {
  double m = radius(0.0);
  for (int j = 1; j < samples; ++j) m = std::max(m, radius(2.0 * kPi * j / samples));
  return m;
}

void StarCurve::validate(int samples) const {
  if (a.size() != b.size()) throw InvalidCurveError("a and b coefficient counts differ");
  if (!center.allFinite() || !std::isfinite(a0)) {
    throw InvalidCurveError("non-finite curve parameters");
  }
  const double rmin = minRadius(samples);
  if (!(rmin > 0.0)) {
    throw InvalidCurveError("radial function not positive (min " + std::to_string(rmin) + ")");
  }
}

// ---------------------------------------------------------------------------

bool containsPoint(const StarCurve& c, const Point& x) {
  const Point d = x - c.center;
  return d.norm() < c.radius(std::atan2(d.y(), d.x()));
}

AreaCentroid areaCentroid(const StarCurve& c) {
  // r^3 has degree 3K, so 4K + 64 trapezoid nodes integrate exactly.
  const int n = 4 * c.order() + 64;
  double area = 0.0;
  Point moment = Point::Zero();
  for (int j = 0; j < n; ++j) {
    const double t = 2.0 * kPi * j / n;
    const double r = c.radius(t);
    area += 0.5 * r * r;
    moment += (r * r * r / 3.0) * Point(std::cos(t), std::sin(t));
  }
  area *= 2.0 * kPi / n;
  moment *= 2.0 * kPi / n;
  return {area, c.center + moment / area};
}

std::vector<QuadNode> interiorQuadrature(const StarCurve& c, int radial_order,
                                         int angular_order, int object_id) {
  c.validate();
  if (radial_order < 1 || angular_order < 1) {
    throw DomainError("interiorQuadrature: orders must be positive");
  }
  const GaussRule g = gaussLegendre(radial_order);
  std::vector<QuadNode> out;
  out.reserve(static_cast<std::size_t>(radial_order) * angular_order);
  const double dt = 2.0 * kPi / angular_order;
  for (int j = 0; j < angular_order; ++j) {
    const double t = dt * j;
    const double r = c.radius(t);
    const Point e(std::cos(t), std::sin(t));
    for (int i = 0; i < radial_order; ++i) {
      const double s = 0.5 * (g.nodes[i] + 1.0);
      const double w = 0.5 * g.weights[i];
      out.push_back({c.center + (s * r) * e, dt * r * r * s * w, object_id});
    }
  }
  return out;
}

std::vector<QuadNode> interiorQuadrature(const InclusionSet& s) {
  std::vector<QuadNode> out;
  for (std::size_t l = 0; l < s.objects.size(); ++l) {
    auto part = interiorQuadrature(s.objects[l], s.radial_order, s.angular_order,
                                   static_cast<int>(l));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<DiscGroup> mergeDiscs(std::span<const Disc> discs) {
  const int n = static_cast<int>(discs.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (discs[i].center - discs[j].center).norm();
      if (d < discs[i].radius + discs[j].radius + 1e-12) {
        const int a = find(i), b = find(j);
        // keep the smaller index as root so labels follow the smallest member
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::vector<DiscGroup> groups;
  std::vector<int> label(n, -1);
  for (int i = 0; i < n; ++i) {
    const int root = find(i);
    if (label[root] < 0) {
      label[root] = static_cast<int>(groups.size());
      groups.push_back({label[root], {}});
    }
    groups[label[root]].members.push_back(i);
  }
  return groups;
}

StarCurve initialCurveFromDiscs(std::span<const Disc> members, cplx total_weight,
                                cplx f_centroid, double kappa, int order) {
  if (members.empty()) throw DomainError("initialCurveFromDiscs: no member discs");
  double area = 0.0;
  Point c = Point::Zero();
  for (const Disc& d : members) {
    const double a = d.radius * d.radius;
    area += a;
    c += a * d.center;
  }
  c /= area;
  eqdiscs::WeightToRadiusProblem p;
  p.weight_magnitude = std::abs(total_weight);
  p.source_magnitude = kappa * kappa * std::abs(f_centroid);
  p.kappa = kappa;
  return StarCurve::circle(c, eqdiscs::radiusFromWeight(p), order);
}

// ---------------------------------------------------------------------------

namespace {

double insideGap(const StarCurve& c, const Point& x) {
  const Point d = x - c.center;
  return c.radius(std::atan2(d.y(), d.x())) - d.norm();
}

}  // namespace

std::vector<std::pair<double, double>> rayIntervals(const StarCurve& c, const Point& origin,
                                                    const Point& dir, double rho_max,
                                                    int samples) {
  std::vector<std::pair<double, double>> out;
  auto h = [&](double rho) { return insideGap(c, origin + rho * dir); };
  // Crossing by Illinois-type false position, bracket kept throughout.
  auto crossing = [&](double lo, double hlo, double hi, double hhi) {
    int side = 0;
    for (int it = 0; it < 100 && hi - lo > 1e-15 * (1.0 + hi); ++it) {
      const double m = (lo * hhi - hi * hlo) / (hhi - hlo);
      const double mid = (m > lo && m < hi) ? m : 0.5 * (lo + hi);
      const double hm = h(mid);
      if (hm == 0.0) return mid;
      if ((hm > 0.0) == (hlo > 0.0)) {
        lo = mid;
        hlo = hm;
        if (side == -1) hhi *= 0.5;
        side = -1;
      } else {
        hi = mid;
        hhi = hm;
        if (side == 1) hlo *= 0.5;
        side = 1;
      }
    }
    return 0.5 * (lo + hi);
  };
  double prev_rho = 0.0;
  double prev_h = h(0.0);
  bool inside = prev_h > 0.0;
  double start = 0.0;
  for (int i = 1; i <= samples; ++i) {
    const double rho = rho_max * i / samples;
    const double hv = h(rho);
    const bool now = hv > 0.0;
    if (now != inside) {
      const double x = crossing(prev_rho, prev_h, rho, hv);
      if (inside) {
        out.emplace_back(start, x);
      } else {
        start = x;
      }
      inside = now;
    }
    prev_rho = rho;
    prev_h = hv;
  }
  if (inside) out.emplace_back(start, rho_max);
  return out;
}

std::vector<std::pair<int, int>> overlappingObjects(const InclusionSet& s, int samples) {
  std::vector<std::pair<int, int>> out;
  const int n = static_cast<int>(s.objects.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      bool hit = false;
      for (int k = 0; k < samples && !hit; ++k) {
        const double t = 2.0 * kPi * k / samples;
        hit = containsPoint(s.objects[j], s.objects[i].point(t)) ||
              containsPoint(s.objects[i], s.objects[j].point(t));
      }
      if (hit) out.emplace_back(i, j);
    }
  }
  return out;
}

double symmetricDifferenceArea(const StarCurve& reference, const StarCurve& other, int rays) {
  const double rho_max = (other.center - reference.center).norm() +
                         std::max(other.maxRadius(), reference.maxRadius()) * 1.05 + 1e-9;
  double total = 0.0;
  for (int k = 0; k < rays; ++k) {
    const double th = 2.0 * kPi * k / rays;
    const Point dir(std::cos(th), std::sin(th));
    const double rp = reference.radius(th);
    const auto q = rayIntervals(other, reference.center, dir, rho_max, 128);
    // measure of ([0, rp] xor Q) with weight rho d rho
    auto sq = [](double x) { return 0.5 * x * x; };
    double both = 0.0, qsum = 0.0;
    for (const auto& [lo, hi] : q) {
      qsum += sq(hi) - sq(lo);
      const double a = std::min(lo, rp), b = std::min(hi, rp);
      if (b > a) both += sq(b) - sq(a);
    }
    total += sq(rp) + qsum - 2.0 * both;
  }
  return total * 2.0 * kPi / rays;
}

double radialL2Error(const StarCurve& reference, const StarCurve& other, int samples) {
  const double rho_max = (other.center - reference.center).norm() + other.maxRadius() * 1.05;
  std::vector<double> rp(samples), rq(samples);
  double norm2 = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double th = 2.0 * kPi * k / samples;
    rp[k] = reference.radius(th);
    norm2 += rp[k] * rp[k];
    const auto q = rayIntervals(other, reference.center, Point(std::cos(th), std::sin(th)),
                                rho_max, 128);
    rq[k] = q.empty() ? 0.0 : q.back().second;
  }
  double best = std::numeric_limits<double>::infinity();
  for (int shift = 0; shift < samples; ++shift) {
    double e = 0.0;
    for (int k = 0; k < samples; ++k) {
      const double d = rq[(k + shift) % samples] - rp[k];
      e += d * d;
    }
    best = std::min(best, e);
  }
  return std::sqrt(best / norm2);
}

}  // namespace nltomo::geometry
