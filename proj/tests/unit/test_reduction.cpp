#include <doctest.h>

#include <cmath>
#include <optional>
#include <random>

#include "helpers.hpp"
#include "magorbit/closed_orbits.hpp"
#include "magorbit/errors.hpp"
#include "magorbit/loop_field.hpp"
#include "magorbit/reduction.hpp"

using namespace magorbit;
using namespace testing_support;

namespace {

LatitudeFrame random_frame(std::mt19937_64& rng) {
  LatitudeFrame f;
  f.w = random_unit(rng);
  f.v1 = random_tangent(rng, f.w).normalized();
  f.v0 = f.w.cross(f.v1);
  return f;
}

double closed_form_coefficient(double r) { return -4 * M_PI * M_PI * r * r * r / (4 * M_PI * M_PI * r * r + 1.0); }

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Least-squares split of |alpha'| k1(alpha) (alpha x alpha') into the images of W2, W3 under
// (-D^2 + 1) plus the range directions {l1 alpha' : l1 _|_ 1} + {l2 J alpha' : l2 _|_ cos, sin}.
ReducedFieldValue projection_oracle(const CurvatureFunction& k1, const LatitudeFamily& fam, int n = 1024) {
  std::vector<Vec3> pts, W2, W3;
  for (int j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) / n;
    pts.push_back(family_point(fam, t).x);
    const auto W = kernel_fields(fam.r, fam.frame, t);
    W2.push_back(W[2].V);
    W3.push_back(W[3].V);
  }
  const LoopGrid loop(pts);
  const auto m = ConformalMetric::round();
  const auto LW2 = frame_reconstruct(m, loop, apply_helmholtz(m, loop, frame_components(m, loop, W2)));
  const auto LW3 = frame_reconstruct(m, loop, apply_helmholtz(m, loop, frame_components(m, loop, W3)));
  const int modes = 8;
  const int cols = 2 + 2 * modes + 1 + 2 * (modes - 1);
  Eigen::MatrixXd A(3 * n, cols);
  Eigen::VectorXd b(3 * n);
  for (int j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) / n;
    const PhaseState a = family_point(fam, t);
    const Vec3 normal = a.x.cross(a.v);
    b.segment<3>(3 * j) = a.v.norm() * k1(a.x) * normal;
    int c = 0;
    A.block<3, 1>(3 * j, c++) = LW2[j];
    A.block<3, 1>(3 * j, c++) = LW3[j];
    for (int q = 1; q <= modes; ++q) {
      A.block<3, 1>(3 * j, c++) = std::cos(2 * M_PI * q * t) * a.v;
      A.block<3, 1>(3 * j, c++) = std::sin(2 * M_PI * q * t) * a.v;
    }
    A.block<3, 1>(3 * j, c++) = normal;
    for (int q = 2; q <= modes; ++q) {
      A.block<3, 1>(3 * j, c++) = std::cos(2 * M_PI * q * t) * normal;
      A.block<3, 1>(3 * j, c++) = std::sin(2 * M_PI * q * t) * normal;
    }
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  CHECK((A * x - b).norm() < 1e-8 * b.norm());
  return {x[0], x[1]};
}

CurvatureFunction rotated(const CurvatureFunction& k, const Eigen::Matrix3d& R) {
  return CurvatureFunction("rotated", [k, R](const Vec3& x) { return k(R.transpose() * x); });
}

}  // namespace

TEST_CASE("latitude family") {
  CHECK(std::abs(k_to_r(1.0) - M_SQRT1_2) < 1e-15);
  CHECK(std::abs(k_to_r(2.0) - 1.0 / std::sqrt(5.0)) < 1e-15);
  CHECK(kind_of([] { k_to_r(0.0); }) == ErrorKind::domain);
  CHECK(kind_of([] { k_to_r(-1.0); }) == ErrorKind::domain);
  // Small k0 approaches the great circle.
  CHECK(std::abs(k_to_r(1e-8) - 1.0) < 1e-15);
  std::mt19937_64 rng(4);
  const auto m = ConformalMetric::round();
  for (double k0 : {0.5, 1.0, 2.0}) {
    const auto fam = LatitudeFamily::from_k0(k0, random_frame(rng));
    const auto k = CurvatureFunction::constant(k0);
    for (double t : {0.0, 0.13, 0.5, 0.77}) {
      const PhaseState s = family_point(fam, t);
      CHECK(std::abs(s.x.norm() - 1.0) < 1e-14);
      // Substitution into the unperturbed equation.
      const Vec3 acc = latitude_accel(fam.r, fam.frame, t);
      CHECK((acc - flow_accel(FlowKind::prescribed, m, k, s.x, s.v)).norm() < 1e-12);
    }
  }
  LatitudeFrame bad;
  bad.v0 = -kE2;
  CHECK_THROWS_AS(LatitudeFamily::from_k0(1.0, bad), Error);
}

TEST_CASE("reduced field closed form for the height perturbation") {
  std::mt19937_64 rng(12);
  const auto k1 = CurvatureFunction::height();
  std::uniform_real_distribution<double> U(0.05, 0.98);
  for (int i = 0; i < 20; ++i) {
    const double r = U(rng);
    LatitudeFamily fam;
    fam.r = r;
    fam.k0 = std::sqrt(1 - r * r) / r;
    fam.frame = random_frame(rng);
    const auto v = reduced_field(k1, fam);
    const double C = closed_form_coefficient(r);
    CHECK(std::abs(v.a2 - C * fam.frame.v1.z()) < 1e-12);
    CHECK(std::abs(v.a3 - C * fam.frame.v0.z()) < 1e-12);
  }
  const auto polar = reduced_field(k1, LatitudeFamily::from_k0(1.0));
  CHECK(std::abs(polar.a2) < 1e-15);
  CHECK(std::abs(polar.a3) < 1e-15);
}

TEST_CASE("reduced field against the projection oracle") {
  std::mt19937_64 rng(21);
  const auto x_squared = CurvatureFunction::polynomial({{1.0, {2, 0, 0}}});
  for (double k0 : {0.7, 1.5}) {
    const auto fam = LatitudeFamily::from_k0(k0, random_frame(rng));
    for (const auto& k1 : {x_squared, CurvatureFunction::height()}) {
      const auto v = reduced_field(k1, fam);
      const auto o = projection_oracle(k1, fam);
      CHECK(std::abs(v.a2 - o.a2) < 1e-8);
      CHECK(std::abs(v.a3 - o.a3) < 1e-8);
    }
  }
}

TEST_CASE("reduced field is linear and rotation equivariant") {
  std::mt19937_64 rng(33);
  const auto k1 = CurvatureFunction::height();
  const auto k2 = CurvatureFunction::polynomial({{1.0, {1, 1, 0}}, {0.5, {0, 0, 3}}});
  const auto combo = CurvatureFunction::combine(0.7, k1, -1.3, k2);
  for (int i = 0; i < 5; ++i) {
    const auto fam = LatitudeFamily::from_k0(1.2, random_frame(rng));
    const auto a = reduced_field(k1, fam), b = reduced_field(k2, fam), c = reduced_field(combo, fam);
    CHECK(std::abs(c.a2 - (0.7 * a.a2 - 1.3 * b.a2)) < 1e-12);
    CHECK(std::abs(c.a3 - (0.7 * a.a3 - 1.3 * b.a3)) < 1e-12);

    const Eigen::Matrix3d R = Eigen::Quaterniond::UnitRandom().toRotationMatrix();
    LatitudeFrame rf{R * fam.frame.v0, R * fam.frame.v1, R * fam.frame.w};
    const auto rot = reduced_field(rotated(k2, R), LatitudeFamily::from_k0(1.2, rf));
    const auto ref = reduced_field(k2, fam);
    CHECK(std::abs(rot.a2 - ref.a2) < 1e-10);
    CHECK(std::abs(rot.a3 - ref.a3) < 1e-10);
  }
}

TEST_CASE("reduced zeros") {
  SUBCASE("height perturbation: the two poles, local degree +1") {
    const double k0 = 1.0;
    const auto zeros = reduced_zeros(CurvatureFunction::height(), k0);
    REQUIRE(zeros.size() == 2);
    const double C = -closed_form_coefficient(k_to_r(k0));
    for (const auto& z : zeros) {
      CHECK(std::abs(std::abs(z.w.z()) - 1.0) < 1e-12);
      CHECK(z.local_degree == 1);
      CHECK(z.predicted_orbit_degree() == -1);
      CHECK_FALSE(z.degenerate);
      const double sign = z.w.z() > 0 ? 1.0 : -1.0;
      CHECK((z.jacobian - sign * C * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-8);
    }
    CHECK(zeros[0].w.z() * zeros[1].w.z() < 0.0);
  }
  SUBCASE("constant perturbation is refused") {
    CHECK(kind_of([] { reduced_zeros(CurvatureFunction::constant(0.3), 1.0); }) == ErrorKind::degenerate);
  }
  SUBCASE("superposition moves the axis") {
    const auto k1 = CurvatureFunction::linear(0.0, Vec3(0.2, 0.0, 1.0));
    const auto zeros = reduced_zeros(k1, 0.8);
    REQUIRE(zeros.size() == 2);
    const Vec3 axis = Vec3(0.2, 0.0, 1.0).normalized();
    for (const auto& z : zeros) {
      CHECK(std::min((z.w - axis).norm(), (z.w + axis).norm()) < 1e-8);
      CHECK(z.local_degree == 1);
    }
  }
}

TEST_CASE("seeds from the reduction") {
  const auto m = ConformalMetric::round();
  const double k0 = 1.0;
  const auto k1 = CurvatureFunction::height();
  const auto zeros = reduced_zeros(k1, k0);
  REQUIRE(zeros.size() == 2);
  SUBCASE("eps = 0 reproduces the family orbit") {
    const auto seed = seed_from_reduction(k0, k1, 0.0, zeros[0]);
    IntegrateOptions io;
    io.tol = 1e-13;
    const auto tr = integrate(m, CurvatureFunction::constant(k0), seed.state, seed.period, io);
    CHECK((tr.final().x - seed.state.x).norm() < 1e-10);
    CHECK((tr.final().v - seed.state.v).norm() < 1e-10);
  }
  SUBCASE("degree transfer and O(eps) displacement") {
    for (const auto& zero : zeros) {
      std::vector<double> dist;
      for (double eps : {0.02, 0.01, 0.005}) {
        CAPTURE(eps);
        const auto seed = seed_from_reduction(k0, k1, eps, zero);
        const auto k = CurvatureFunction::combine(1.0, CurvatureFunction::constant(k0), eps, k1);
        const auto orbit = shoot(m, k, seed.state);
        REQUIRE(orbit.degree);
        CHECK(*orbit.degree == seed.predicted_degree);
        std::vector<Vec3> pts;
        for (int j = 0; j < 64; ++j) pts.push_back(orbit.trajectory.at(orbit.period * j / 64).x);
        dist.push_back(distance_to_family(seed.family, pts));
      }
      CHECK(std::abs(dist[0] / dist[1] - 2.0) < 0.4);
      CHECK(std::abs(dist[1] / dist[2] - 2.0) < 0.4);
    }
  }
  SUBCASE("degenerate zero is refused") {
    ReducedZero z = zeros[0];
    z.degenerate = true;
    CHECK(kind_of([&] { seed_from_reduction(k0, k1, 0.01, z); }) == ErrorKind::degenerate);
  }
}
