#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "magorbit/errors.hpp"
#include "magorbit/sphere_geometry.hpp"

using namespace magorbit;
using namespace testing_support;

TEST_CASE("surface points and tangent vectors are projected on construction") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    SurfacePoint p(3.7 * random_unit(rng));
    CHECK(std::abs(p.x().norm() - 1.0) < 1e-12);
    TangentVector t(p, Vec3(1.0, -2.0, 0.5));
    CHECK(std::abs(t.v().dot(p.x())) < 1e-12);
  }
  CHECK_THROWS_AS(SurfacePoint(Vec3::Zero()), Error);
}

TEST_CASE("metric_inner") {
  const SurfacePoint n(kE3);
  const TangentVector a(n, kE1);
  CHECK(metric_inner(ConformalMetric::round(), n, a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(metric_inner(ConformalMetric::constant(0.4), n, a, a) == doctest::Approx(std::exp(0.8)).epsilon(1e-15));
  // u = 0.3 <x,e3> at e3 gives e^{0.6}.
  CHECK(metric_inner(ConformalMetric::zonal({0.3}), n, a, a) == doctest::Approx(std::exp(0.6)).epsilon(1e-15));
  const TangentVector elsewhere(SurfacePoint(kE1), kE2);
  CHECK_THROWS_AS(metric_inner(ConformalMetric::round(), n, a, elsewhere), Error);
}

TEST_CASE("rotate is an isometry with J^2 = -1") {
  std::mt19937_64 rng(2);
  const SurfacePoint n(kE3);
  CHECK((rotate(ConformalMetric::round(), n, TangentVector(n, kE1)).v() - kE2).norm() < 1e-15);
  for (int i = 0; i < 200; ++i) {
    const auto m = random_harmonic_metric(rng, 0.3);
    SurfacePoint p(random_unit(rng));
    TangentVector a(p, random_tangent(rng, p.x()));
    const auto ja = rotate(m, p, a);
    const auto jja = rotate(m, p, ja);
    CHECK((jja.v() + a.v()).norm() < 1e-12);
    CHECK(std::abs(metric_inner(m, p, ja, ja) - metric_inner(m, p, a, a)) < 1e-12);
    CHECK(std::abs(metric_inner(m, p, ja, a)) < 1e-12);
  }
}

TEST_CASE("shipped metrics: gradient and Laplacian agree with finite differences") {
  std::mt19937_64 rng(3);
  for (const auto& m : shipped_metrics()) {
    CAPTURE(m.id());
    for (int i = 0; i < 50; ++i) {
      const Vec3 x = random_unit(rng);
      Vec3 e1, e2;
      tangent_basis(x, e1, e2);
      const double h = 1e-6;
      for (const Vec3& e : {e1, e2}) {
        const double fd =
            (m.u((std::cos(h) * x + std::sin(h) * e)) - m.u((std::cos(h) * x - std::sin(h) * e))) / (2 * h);
        CHECK(std::abs(fd - m.grad0_u(x).dot(e)) < 1e-5);
      }
      CHECK(std::abs(m.grad0_u(x).dot(x)) < 1e-14);
      const double lap = fd_laplacian([&](const Vec3& y) { return m.u(y); }, x);
      CHECK(std::abs(lap - m.lap0_u(x)) < 1e-5);
    }
  }
}

TEST_CASE("gauss_curvature") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const SurfacePoint p(random_unit(rng));
    CHECK(gauss_curvature(ConformalMetric::round(), p) == 1.0);
    CHECK(gauss_curvature(ConformalMetric::constant(0.25), p) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  }
  const auto m = ConformalMetric::zonal({0.2});
  for (int i = 0; i < 50; ++i) {
    const Vec3 x = random_unit(rng);
    const double lap = fd_laplacian([&](const Vec3& y) { return m.u(y); }, x);
    const double oracle = std::exp(-2 * m.u(x)) * (1 - lap);
    CHECK(std::abs(gauss_curvature(m, SurfacePoint(x)) - oracle) < 1e-4);
  }
}

TEST_CASE("covariant_accel against a chart Christoffel oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  // Great circles are geodesics of the round and constant-factor metrics.
  for (const auto& m : {ConformalMetric::round(), ConformalMetric::constant(-0.7)}) {
    const Vec3 x = random_unit(rng);
    const Vec3 v = random_tangent(rng, x).normalized() * 1.7;
    const Vec3 a = -v.squaredNorm() * x;
    CHECK(covariant_accel(m, SurfacePoint(x), v, a).v().norm() < 1e-14);
  }
  std::vector<ConformalMetric> metrics = shipped_metrics();
  metrics.push_back(random_harmonic_metric(rng, 0.4));
  for (const auto& m : metrics) {
    CAPTURE(m.id());
    for (int i = 0; i < 20; ++i) {
      const double th = 0.4 + 2.2 * (0.5 + 0.5 * U(rng));
      const double ph = 3.0 * U(rng);
      const Eigen::Vector2d q(th, ph), qd(U(rng), U(rng)), qdd(U(rng), U(rng));
      auto curve = [&](double t) {
        const Eigen::Vector2d c = q + qd * t + 0.5 * qdd * t * t;
        return chart(c[0], c[1]);
      };
      const double h = 1e-4;
      const Vec3 x = curve(0);
      const Vec3 v = (curve(h) - curve(-h)) / (2 * h);
      const Vec3 a = (curve(h) - 2 * x + curve(-h)) / (h * h);
      const auto gam = chart_christoffel(m, th, ph);
      Eigen::Vector2d cov = qdd;
      for (int k = 0; k < 2; ++k) cov[k] += qd.dot(gam[k] * qd);
      const double dh = 1e-6;
      const Vec3 dth = (chart(th + dh, ph) - chart(th - dh, ph)) / (2 * dh);
      const Vec3 dph = (chart(th, ph + dh) - chart(th, ph - dh)) / (2 * dh);
      const Vec3 oracle = cov[0] * dth + cov[1] * dph;
      const Vec3 got = covariant_accel(m, SurfacePoint(x), tangent_part(x, v), a).v();
      CHECK((got - oracle).norm() < 1e-5);
    }
  }
}

TEST_CASE("quadrature volume") {
  const auto q = quadrature(ConformalMetric::round());
  double total = 0.0;
  for (double w : q.weights) {
    CHECK(w > 0.0);
    total += w;
  }
  CHECK(std::abs(total - 4 * M_PI) < 1e-6);
  CHECK(std::abs(volume(ConformalMetric::constant(0.3), q) - 4 * M_PI * std::exp(0.6)) < 1e-6);
  for (const auto& n : q.nodes) CHECK(std::abs(n.norm() - 1.0) < 1e-12);

  // Monte Carlo volume oracle for u = 0.2 <x,e3>.
  const auto m = ConformalMetric::zonal({0.2});
  std::mt19937_64 rng(6);
  const int N = 1000000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double f = m.factor(random_unit(rng));
    s += f;
    s2 += f * f;
  }
  const double mean = s / N;
  const double sigma = 4 * M_PI * std::sqrt((s2 / N - mean * mean) / N);
  CHECK(std::abs(volume(m, q) - 4 * M_PI * mean) < 3 * sigma);
  // Exact value: 2 pi * int_{-1}^{1} e^{0.4 z} dz.
  CHECK(std::abs(volume(m, q) - 2 * M_PI * (std::exp(0.4) - std::exp(-0.4)) / 0.4) < 1e-4);
}

TEST_CASE("global Gauss-Bonnet: integral of K dA_g is 4 pi for shipped metrics") {
  const auto q = icosahedral_quadrature(kDefaultQuadratureLevel);
  for (const auto& m : shipped_metrics()) {
    CAPTURE(m.id());
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i)
      s += q.weights[i] * m.factor(q.nodes[i]) * gauss_curvature(m, q.nodes[i]);
    CHECK(std::abs(s - 4 * M_PI) < 1e-4);
  }
}

TEST_CASE("field_extremes") {
  auto one = field_extremes([](const Vec3&) { return 1.0; });
  CHECK(one.inf == 1.0);
  CHECK(one.sup == 1.0);
  CHECK(one.margin == 0.0);
  auto h = field_extremes([](const Vec3& x) { return x.z(); });
  CHECK(std::abs(h.inf + 1) < 1e-3);
  CHECK(std::abs(h.sup - 1) < 1e-3);
  auto hl = field_extremes([](const Vec3& x) { return x.z(); }, 4, 1.0);
  CHECK_FALSE(hl.heuristic);

  // Curvature of u = 0.2 <x,e3> against dense sampling.
  const auto m = ConformalMetric::zonal({0.2});
  auto K = [&](const Vec3& x) { return gauss_curvature(m, x); };
  auto e = field_extremes(K);
  std::mt19937_64 rng(7);
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 1000000; ++i) {
    const double v = K(random_unit(rng));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(e.inf - e.margin <= lo);
  CHECK(e.sup + e.margin >= hi);
  CHECK(e.inf <= lo + 1e-9);
  CHECK(e.sup >= hi - 1e-9);
}

TEST_CASE("metric JSON") {
  auto m = ConformalMetric::from_json(Json::parse(R"({"kind":"conformal_zonal","coeffs":[0.1,0.2]})"));
  CHECK(m.u(kE3) == doctest::Approx(0.3));
  CHECK(ConformalMetric::from_json(Json::parse(R"({"kind":"round"})")).is_round());
  auto h = ConformalMetric::from_json(Json::parse(R"({"kind":"conformal_harmonic","terms":[{"l":2,"m":0,"coeff":0.5}]})"));
  CHECK(h.u(kE3) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(ConformalMetric::from_json(Json::parse(R"({"kind":"conformal_zonal","coef":[1]})")),
                       doctest::Contains("'coef'"), Error);
  CHECK_THROWS_WITH_AS(ConformalMetric::from_json(Json::parse(R"({"kind":"conformal_zonal"})")),
                       doctest::Contains("'coeffs'"), Error);
  CHECK_THROWS_WITH_AS(ConformalMetric::from_json(Json::parse(R"({"kind":"flat"})")), doctest::Contains("kind"),
                       Error);
  CHECK_THROWS_AS(ConformalMetric::harmonic({{4, 0, 1.0}}), Error);
}
