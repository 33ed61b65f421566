#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>

#include "helpers.hpp"
#include "magorbit/errors.hpp"
#include "magorbit/poincare.hpp"

using namespace magorbit;
using namespace testing_support;

namespace {

CurvatureFunction perturbed(double k0, double eps) {
  return CurvatureFunction::combine(1.0, CurvatureFunction::constant(k0), eps, CurvatureFunction::height());
}

Eigen::Matrix2d fd_return_derivative(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                     double h) {
  Eigen::Matrix2d D;
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector2d dz = h * Eigen::Vector2d::Unit(i);
    D.col(i) = (return_map(m, k, sec, dz).z - return_map(m, k, sec, Eigen::Vector2d(-dz)).z) / (2 * h);
  }
  return D;
}

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("section chart") {
  std::mt19937_64 rng(31);
  const auto m = random_harmonic_metric(rng, 0.3);
  const Vec3 x = random_unit(rng);
  const PhaseState theta{x, random_tangent(rng, x)};
  for (double tilt : {0.0, 0.6, -1.1}) {
    const Section sec(m, theta, tilt);
    const auto p0 = sec.point(m, Eigen::Vector2d::Zero());
    CHECK((p0.x - theta.x).norm() < 1e-14);
    CHECK((p0.v - theta.v).norm() < 1e-14 * theta.v.norm() + 1e-15);
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector2d z(0.5 * random_unit(rng).x(), 2.0 * random_unit(rng).y());
      const auto p = sec.point(m, z);
      CHECK(std::abs(sec.crossing(p.x)) < 1e-15);
      CHECK(std::abs(p.x.dot(p.v)) < 1e-15);
      CHECK(std::abs(g_speed(m, p) - sec.speed()) < 1e-13);
      CHECK((sec.coords(p) - z).norm() < 1e-13);
    }
    // The section is transversal: the flow crosses it with nonzero normal velocity.
    CHECK(theta.v.normalized().dot(sec.normal()) > 1e-6);
    const auto B = sec.basis(m);
    CHECK((B.transpose() * B - Eigen::Matrix2d::Identity()).norm() < 1e-12);
  }
  CHECK_THROWS_AS(Section(m, theta, M_PI / 2), Error);
}

TEST_CASE("return_map") {
  const auto m = ConformalMetric::round();
  SUBCASE("fixed point of a closed orbit") {
    const ZonalCircle zc(1.0, 0.05, 1);
    const auto k = perturbed(1.0, 0.05);
    const Section sec(m, zc.s0, 0.0, FlowKind::prescribed, 1.0);
    const auto r = return_map(m, k, sec, zc.s0);
    CHECK((r.state.x - zc.s0.x).norm() < 1e-8);
    CHECK((r.state.v - zc.s0.v).norm() < 1e-8);
    CHECK(std::abs(r.time - 1.0) < 1e-10);
    CHECK(std::abs(sec.crossing(r.state.x)) < 1e-9);
  }
  SUBCASE("unperturbed family: every nearby start returns to itself") {
    const LatitudeFrame fr;
    const double r = latitude_radius(1.0);
    const Section sec(m, latitude_state(r, fr, 0.0), 0.3);
    const auto k = CurvatureFunction::constant(1.0);
    for (const Eigen::Vector2d z : {Eigen::Vector2d(1e-3, 2e-3), Eigen::Vector2d(-0.05, 0.02)}) {
      const auto ret = return_map(m, k, sec, z);
      CHECK((ret.z - z).norm() < 1e-8);
      CHECK(std::abs(ret.time - 1.0) < 0.2);
    }
  }
  SUBCASE("self-consistency under a tighter tolerance") {
    const auto k = CurvatureFunction::linear(1.2, Vec3(0.05, -0.08, 0.1));
    const auto mz = ConformalMetric::zonal({0.1, 0.05});
    const Section sec(mz, PhaseState{Vec3(0.6, 0.0, 0.8), Vec3(0.0, 1.0, 0.0)});
    ReturnOptions a, b;
    a.tol = 1e-11;
    b.tol = 1e-13;
    for (const Eigen::Vector2d z : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.02, -0.03)}) {
      const auto ra = return_map(mz, k, sec, z, a);
      const auto rb = return_map(mz, k, sec, z, b);
      CHECK((ra.state.x - rb.state.x).norm() < 1e-8);
      CHECK((ra.state.v - rb.state.v).norm() < 1e-8);
      CHECK(std::abs(ra.time - rb.time) < 1e-9);
      CHECK(std::abs(sec.crossing(ra.state.x)) < 1e-9);
    }
  }
  SUBCASE("errors") {
    const auto k = CurvatureFunction::constant(1.0);
    const Section sec(m, PhaseState{kE1, kE2});
    CHECK(kind_of([&] { return_map(m, k, sec, PhaseState{kE2, kE1}); }) == ErrorKind::contract);
    CHECK(kind_of([&] { return_map(m, k, sec, PhaseState{kE1, 2.0 * kE2}); }) == ErrorKind::contract);
    ReturnOptions shortest;
    shortest.horizon = 0.2;
    CHECK(kind_of([&] { return_map(m, k, sec, PhaseState{kE1, kE2}, shortest); }) == ErrorKind::no_return);
  }
}

TEST_CASE("linearized_return") {
  const auto m = ConformalMetric::round();
  SUBCASE("unperturbed latitude orbit is degenerate") {
    const double r = latitude_radius(1.0);
    const Section sec(m, latitude_state(r, LatitudeFrame{}, 0.0));
    const auto dP = linearized_return(m, CurvatureFunction::constant(1.0), sec, 1.0);
    CHECK((dP - Eigen::Matrix2d::Identity()).norm() < 1e-6);
  }
  SUBCASE("perturbed orbits") {
    const double eps = 0.01;
    const auto k = perturbed(1.0, eps);
    for (int pole : {1, -1}) {
      CAPTURE(pole);
      const ZonalCircle zc(1.0, eps, pole);
      for (double tilt : {0.0, 0.5}) {
        const Section sec(m, zc.s0, tilt, FlowKind::prescribed, 1.0);
        const auto dP = linearized_return(m, k, sec, 1.0);
        const auto dP2 = linearized_return(m, k, sec, 1.0, 1e-13);
        CHECK(std::abs(dP.determinant() - 1.0) < 1e-6);
        const double D = (dP - Eigen::Matrix2d::Identity()).determinant();
        const double D2 = (dP2 - Eigen::Matrix2d::Identity()).determinant();
        CHECK(D > 0.0);
        CHECK(D > 10 * kDegeneracyThreshold);
        CHECK(std::abs(D - D2) < 1e-3 * D);
        const auto fd = fd_return_derivative(m, k, sec, 1e-5);
        CHECK((fd - dP).cwiseAbs().maxCoeff() < 1e-4);
      }
    }
  }
}

TEST_CASE("index of synthetic linear maps") {
  const double c = std::cos(0.3), s = std::sin(0.3);
  Eigen::Matrix2d rot;
  rot << c, -s, s, c;
  const Eigen::Matrix2d hyp = Eigen::Vector2d(2.0, 0.5).asDiagonal();
  const Eigen::Matrix2d refl = Eigen::Vector2d(-2.0, -0.5).asDiagonal();
  Eigen::Matrix2d shear_hyp;  // non-diagonal hyperbolic
  shear_hyp << 2.0, 1.0, 1.0, 1.0;
  const std::vector<std::pair<Eigen::Matrix2d, int>> cases = {{rot, 1}, {hyp, -1}, {refl, 1}, {shear_hyp, -1}};
  for (const auto& [A, expected] : cases) {
    CAPTURE(expected);
    const auto sd = index_from_linearization(A);
    CHECK(sd.index == expected);
    CHECK(sd.method == IndexMethod::sign_det);
    const auto wd = winding_index([&](const Eigen::Vector2d& z) { return Eigen::Vector2d((A - Eigen::Matrix2d::Identity()) * z); },
                                  0.1, 1e-12);
    CHECK(wd.index == expected);
    CHECK(wd.method == IndexMethod::winding);
    CHECK(wd.certificate > 1e-11);
  }
  CHECK(kind_of([] { index_from_linearization(Eigen::Matrix2d::Identity()); }) == ErrorKind::degenerate);
  // z -> z^2 has winding 2; the generic routine reports it, fixed_point_index would refuse.
  const auto sq = winding_index([](const Eigen::Vector2d& z) { return Eigen::Vector2d(z[0] * z[0] - z[1] * z[1], 2 * z[0] * z[1]); },
                                0.5, 1e-12);
  CHECK(sq.index == 2);
  CHECK(kind_of([] { winding_index([](const Eigen::Vector2d&) { return Eigen::Vector2d(1e-13, 0.0); }, 0.1, 1e-13); }) ==
        ErrorKind::uncertified);
}

TEST_CASE("fixed_point_index and orbit_degree") {
  const auto m = ConformalMetric::round();
  SUBCASE("degenerate family is refused") {
    const double r = latitude_radius(1.0);
    const Section sec(m, latitude_state(r, LatitudeFrame{}, 0.0), 0.0, FlowKind::prescribed, 1.0);
    CHECK(kind_of([&] { fixed_point_index(m, CurvatureFunction::constant(1.0), sec, 1.0, 1e-3); }) ==
          ErrorKind::uncertified);
  }
  SUBCASE("perturbed orbits have degree -1 on any section") {
    const double eps = 0.01;
    const auto k = perturbed(1.0, eps);
    IntegrateOptions io;
    io.tol = 1e-13;
    for (int pole : {1, -1}) {
      const ZonalCircle zc(1.0, eps, pole);
      const auto orbit = integrate(m, k, zc.s0, 1.0, io);
      CHECK(orbit_degree(m, k, orbit) == -1);
      CHECK(orbit_degree(m, k, orbit, 0.7) == -1);
      CHECK(orbit_degree(m, k, orbit, -0.4) == -1);
      // Winding on the probe circle agrees with sign_det.
      const Section sec(m, zc.s0, 0.0, FlowKind::prescribed, 1.0);
      const auto w = winding_index(
          [&](const Eigen::Vector2d& z) { return Eigen::Vector2d(return_map(m, k, sec, z).z - z); }, 1e-3, 1e-12);
      CHECK(w.index == 1);
    }
  }
}
