#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "magorbit/curvature.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/sphere_geometry.hpp"

namespace testing_support {

using magorbit::ConformalMetric;
using magorbit::Vec3;

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Vec3 random_tangent(std::mt19937_64& rng, const Vec3& x, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return scale * magorbit::tangent_part(x, v);
}

// A mix of harmonic terms of degree 1..3 with the given amplitude.
inline ConformalMetric random_harmonic_metric(std::mt19937_64& rng, double amplitude) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ConformalMetric::HarmonicTerm> terms;
  for (int l = 1; l <= 3; ++l)
    for (int m = -l; m <= l; ++m) terms.push_back({l, m, amplitude * u(rng) / (l * l)});
  return ConformalMetric::harmonic(terms);
}

inline std::vector<ConformalMetric> shipped_metrics() {
  return {ConformalMetric::round(), ConformalMetric::constant(0.3), ConformalMetric::zonal({0.2}),
          ConformalMetric::zonal({0.1, -0.15, 0.05}),
          ConformalMetric::harmonic({{1, 1, 0.1}, {2, 0, 0.05}, {2, -2, 0.07}, {3, 1, -0.03}, {3, -3, 0.02}})};
}

// Spherical coordinates chart (theta, phi).
inline Vec3 chart(double th, double ph) {
  return {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
}

// Metric coefficients of g = e^{2u} g0 in the chart.
inline Eigen::Matrix2d chart_metric(const ConformalMetric& m, double th, double ph) {
  const double f = std::exp(2.0 * m.u(chart(th, ph)));
  Eigen::Matrix2d g;
  g << f, 0.0, 0.0, f * std::sin(th) * std::sin(th);
  return g;
}

// Christoffel symbols Gamma^k_ij by central differences of the chart metric.
inline std::array<Eigen::Matrix2d, 2> chart_christoffel(const ConformalMetric& m, double th, double ph) {
  const double h = 1e-5;
  std::array<Eigen::Matrix2d, 2> dg;  // dg[l] = d g / d q^l
  dg[0] = (chart_metric(m, th + h, ph) - chart_metric(m, th - h, ph)) / (2 * h);
  dg[1] = (chart_metric(m, th, ph + h) - chart_metric(m, th, ph - h)) / (2 * h);
  const Eigen::Matrix2d ginv = chart_metric(m, th, ph).inverse();
  std::array<Eigen::Matrix2d, 2> gam;
  for (int k = 0; k < 2; ++k) {
    gam[k].setZero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int l = 0; l < 2; ++l)
          gam[k](i, j) += 0.5 * ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
  }
  return gam;
}

// Round Laplacian by a 5-point stencil in geodesic normal coordinates at x.
inline double fd_laplacian(const std::function<double(const Vec3&)>& f, const Vec3& x, double h = 1e-3) {
  Vec3 e1, e2;
  magorbit::tangent_basis(x, e1, e2);
  auto expmap = [&](double a, double b) {
    const Vec3 d = a * e1 + b * e2;
    const double r = d.norm();
    if (r == 0.0) return x;
    return Vec3(std::cos(r) * x + std::sin(r) * d / r);
  };
  return (f(expmap(h, 0)) + f(expmap(-h, 0)) + f(expmap(0, h)) + f(expmap(0, -h)) - 4 * f(x)) / (h * h);
}

// Latitude circle of geodesic curvature k0 on the round sphere, period 1, frame (e1, e2, e3).
struct Latitude {
  double r;
  explicit Latitude(double k0) : r(1.0 / std::sqrt(1.0 + k0 * k0)) {}
  Vec3 x(double t) const {
    const double c = std::cos(2 * M_PI * t), s = std::sin(2 * M_PI * t);
    return {r * c, r * s, std::sqrt(1 - r * r)};
  }
  Vec3 v(double t) const {
    const double c = std::cos(2 * M_PI * t), s = std::sin(2 * M_PI * t);
    return 2 * M_PI * r * Vec3(-s, c, 0.0);
  }
  Vec3 a(double t) const {
    const double c = std::cos(2 * M_PI * t), s = std::sin(2 * M_PI * t);
    return -4 * M_PI * M_PI * r * Vec3(c, s, 0.0);
  }
};

// Circle of latitude around +e3 (pole = 1) or -e3 (pole = -1) that is a closed orbit of
// the prescribed flow on the round sphere for k = k0 + eps <x,e3>. Speed 2 pi r, period 1.
struct ZonalCircle {
  double height = 0.0;  // distance of the circle's plane from the origin
  double r = 0.0;
  magorbit::PhaseState s0;
  ZonalCircle(double k0, double eps, int pole) {
    double h = k0 / std::sqrt(1 + k0 * k0);
    for (int i = 0; i < 50; ++i) {
      const double q = std::sqrt(1 - h * h);
      const double f = h / q - k0 - eps * pole * h;
      const double df = 1 / (q * q * q) - eps * pole;
      h -= f / df;
    }
    height = h;
    r = std::sqrt(1 - h * h);
    s0.x = Vec3(r, 0.0, pole * h);
    s0.v = 2 * M_PI * r * Vec3(0.0, pole, 0.0);
  }
};

}  // namespace testing_support
