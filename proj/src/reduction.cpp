#include "magorbit/reduction.hpp"

#include <cmath>

#include "magorbit/errors.hpp"

namespace magorbit {

double k_to_r(double k0) {
  if (!(k0 > 0.0)) fail(ErrorKind::domain, "latitude family needs k0 > 0");
  return latitude_radius(k0);
}

LatitudeFamily LatitudeFamily::from_k0(double k0, const LatitudeFrame& frame) {
  LatitudeFamily f;
  f.k0 = k0;
  f.r = k_to_r(k0);
  f.frame = frame;
  f.validate();
  return f;
}

LatitudeFamily LatitudeFamily::from_axis(double k0, const Vec3& w) {
  require(w.norm() > 0.0, "latitude family: zero axis");
  LatitudeFrame fr;
  fr.w = w.normalized();
  Vec3 b1, b2;
  tangent_basis(fr.w, b1, b2);
  fr.v1 = b1;
  fr.v0 = b1.cross(b2).dot(fr.w) > 0.0 ? b2 : Vec3(-b2);
  return from_k0(k0, fr);
}

void LatitudeFamily::validate() const {
  check_frame(frame);
  require(r > 0.0 && r < 1.0, "latitude family: r must lie in (0, 1)");
  require(std::abs(k0 * r - std::sqrt(1.0 - r * r)) <= 1e-12, "latitude family: k0 r != sqrt(1 - r^2)");
}

PhaseState family_point(const LatitudeFamily& fam, double t) { return latitude_state(fam.r, fam.frame, t); }

ReducedFieldValue reduced_field(const CurvatureFunction& k1, const LatitudeFamily& fam, int samples) {
  return reduced_field(NormalPerturbation([&k1](const Vec3& x, const Vec3&) { return k1(x); }), fam, samples);
}

ReducedFieldValue reduced_field(const NormalPerturbation& k1, const LatitudeFamily& fam, int samples) {
  require(samples >= 8, "reduced_field: too few quadrature samples");
  const double speed = 2 * M_PI * fam.r;
  double c = 0.0, s = 0.0;
  for (int j = 0; j < samples; ++j) {
    const double t = static_cast<double>(j) / samples;
    const PhaseState a = family_point(fam, t);
    const double mu = speed * k1(a.x, a.x.cross(a.v).normalized());
    c += mu * std::cos(2 * M_PI * t);
    s += mu * std::sin(2 * M_PI * t);
  }
  c /= samples;
  s /= samples;
  // Normalization pinned by the height perturbation, where a2 = -4 pi^2 r^3 / (4 pi^2 r^2 + 1) <v1, e3>.
  const double scale = -4 * M_PI * fam.r / (4 * M_PI * M_PI * fam.r * fam.r + 1.0);
  return {scale * c, scale * s};
}

Vec3 reduced_field_at(const CurvatureFunction& k1, double k0, const Vec3& w, int samples) {
  return reduced_field_at(NormalPerturbation([&k1](const Vec3& x, const Vec3&) { return k1(x); }), k0, w, samples);
}

Vec3 reduced_field_at(const NormalPerturbation& k1, double k0, const Vec3& w, int samples) {
  const auto fam = LatitudeFamily::from_axis(k0, w);
  const auto v = reduced_field(k1, fam, samples);
  return v.a2 * fam.frame.v1 + v.a3 * fam.frame.v0;
}

namespace {

Eigen::Matrix2d tangent_jacobian(const NormalPerturbation& k1, double k0, const Vec3& w, const Vec3& b1,
                                 const Vec3& b2, int samples) {
  const double h = 1e-5;
  Eigen::Matrix2d J;
  const Vec3 dirs[2] = {b1, b2};
  for (int i = 0; i < 2; ++i) {
    const Vec3 fp = reduced_field_at(k1, k0, (w + h * dirs[i]).normalized(), samples);
    const Vec3 fm = reduced_field_at(k1, k0, (w - h * dirs[i]).normalized(), samples);
    const Vec3 d = (fp - fm) / (2 * h);
    J(0, i) = d.dot(b1);
    J(1, i) = d.dot(b2);
  }
  return J;
}

std::vector<Vec3> fibonacci_sphere(int n) {
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    pts.emplace_back(rho * std::cos(golden * i), rho * std::sin(golden * i), z);
  }
  return pts;
}

}  // namespace

std::vector<ReducedZero> reduced_zeros(const CurvatureFunction& k1, double k0, const ReducedZeroOptions& opt) {
  return reduced_zeros(NormalPerturbation([&k1](const Vec3& x, const Vec3&) { return k1(x); }), k0, opt);
}

std::vector<ReducedZero> reduced_zeros(const NormalPerturbation& k1, double k0, const ReducedZeroOptions& opt) {
  k_to_r(k0);
  const auto seeds = fibonacci_sphere(opt.seeds);
  double scale = 0.0;
  for (const auto& w : seeds) scale = std::max(scale, reduced_field_at(k1, k0, w, opt.samples).norm());
  if (scale < 1e-14)
    fail(ErrorKind::degenerate, "reduced field vanishes identically; the perturbation does not break the symmetry");

  std::vector<ReducedZero> zeros;
  for (const auto& seed : seeds) {
    Vec3 w = seed;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      const Vec3 F = reduced_field_at(k1, k0, w, opt.samples);
      if (F.norm() <= opt.tol * scale) {
        ok = true;
        break;
      }
      Vec3 b1, b2;
      tangent_basis(w, b1, b2);
      const Eigen::Matrix2d J = tangent_jacobian(k1, k0, w, b1, b2, opt.samples);
      Eigen::Vector2d step = -J.colPivHouseholderQr().solve(Eigen::Vector2d(F.dot(b1), F.dot(b2)));
      if (!step.allFinite()) break;
      if (step.norm() > 0.5) step *= 0.5 / step.norm();
      w = (w + step[0] * b1 + step[1] * b2).normalized();
      if (step.norm() < 1e-15) {
        ok = reduced_field_at(k1, k0, w, opt.samples).norm() <= 1e3 * opt.tol * scale;
        break;
      }
    }
    if (!ok) continue;
    bool seen = false;
    for (const auto& z : zeros) seen = seen || (z.w - w).norm() < opt.merge;
    if (seen) continue;
    ReducedZero z;
    z.w = w;
    const auto fam = LatitudeFamily::from_axis(k0, w);
    z.jacobian = tangent_jacobian(k1, k0, w, fam.frame.v1, fam.frame.v0, opt.samples);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(z.jacobian);
    const auto sv = svd.singularValues();
    z.condition = sv[1] > 0.0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
    z.degenerate = !(z.condition <= 1e10);
    const double det = z.jacobian.determinant();
    z.local_degree = z.degenerate ? 0 : (det > 0.0 ? 1 : -1);
    zeros.push_back(z);
  }
  return zeros;
}

ReductionSeed seed_from_reduction(double k0, const CurvatureFunction& k1, double eps, const ReducedZero& zero) {
  return seed_from_zero(k0, zero, eps, k1.id());
}

ReductionSeed seed_from_zero(double k0, const ReducedZero& zero, double eps, std::string perturbation) {
  if (zero.degenerate) fail(ErrorKind::degenerate, "seed_from_reduction: degenerate reduced zero");
  ReductionSeed s;
  s.family = LatitudeFamily::from_axis(k0, zero.w);
  s.state = family_point(s.family, 0.0);
  s.period = 1.0;
  s.predicted_degree = zero.predicted_orbit_degree();
  s.eps = eps;
  s.perturbation = std::move(perturbation);
  return s;
}

double distance_to_family(const LatitudeFamily& fam, const std::vector<Vec3>& points) {
  const double h = std::sqrt(1.0 - fam.r * fam.r);
  double d = 0.0;
  for (const auto& p : points) {
    const Vec3 q = p - p.dot(fam.frame.w) * fam.frame.w;
    const Vec3 c = q.norm() > 0.0 ? Vec3(h * fam.frame.w + fam.r * q.normalized()) : Vec3(h * fam.frame.w + fam.r * fam.frame.v1);
    d = std::max(d, (p - c).norm());
  }
  return d;
}

}  // namespace magorbit
