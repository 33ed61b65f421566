#include "magorbit/poincare.hpp"

#include <algorithm>
#include <cmath>

#include "magorbit/errors.hpp"

namespace magorbit {

namespace {

double wrap_angle(double a) { return std::remainder(a, 2 * M_PI); }

}  // namespace

Section::Section(const ConformalMetric& m, const PhaseState& theta, double tilt, FlowKind kind, double period_hint)
    : base_(make_state(theta.x, theta.v)), tilt_(tilt), kind_(kind), period_hint_(period_hint) {
  speed_ = g_speed(m, base_);
  require(speed_ > 0.0, "section: zero velocity at the base point");
  require(std::cos(tilt) > 1e-3, "section: tilt must keep the section transversal (|tilt| < pi/2)");
  const Vec3 vhat = base_.v.normalized();
  normal_ = std::cos(tilt) * vhat + std::sin(tilt) * base_.x.cross(vhat);
  along_ = normal_.cross(base_.x);
  phase0_ = -tilt;
}

PhaseState Section::point(const ConformalMetric& m, const Eigen::Vector2d& z) const {
  const Vec3 y = std::cos(z[0]) * base_.x + std::sin(z[0]) * along_;
  const double phi = phase0_ + z[1];
  const Vec3 dir = std::cos(phi) * normal_ + std::sin(phi) * y.cross(normal_);
  return {y, speed_ * std::exp(-m.u(y)) * dir};
}

Eigen::Vector2d Section::coords(const PhaseState& s) const {
  const double z1 = std::atan2(s.x.dot(along_), s.x.dot(base_.x));
  const double phi = std::atan2(s.v.dot(s.x.cross(normal_)), s.v.dot(normal_));
  return {z1, wrap_angle(phi - phase0_)};
}

std::array<PhaseVariation, 2> Section::tangent(const ConformalMetric& m, const Eigen::Vector2d& z) const {
  std::array<PhaseVariation, 2> cols;
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector2d dz = h * Eigen::Vector2d::Unit(i);
    const PhaseState p = point(m, z + dz), q = point(m, z - dz);
    cols[i] = {(p.x - q.x) / (2 * h), (p.v - q.v) / (2 * h)};
  }
  return cols;
}

Eigen::Matrix<double, 4, 2> Section::basis(const ConformalMetric& m) const {
  const Vec3 e1 = base_.v / speed_;
  const Vec3 e2 = base_.x.cross(e1);
  Eigen::Matrix<double, 4, 2> B;
  const auto cols = tangent(m, Eigen::Vector2d::Zero());
  for (int i = 0; i < 2; ++i) {
    const JacobiState j = from_ambient(m, base_, cols[i]);
    const Vec3& x = base_.x;
    B.col(i) << inner(m, x, j.V, e1), inner(m, x, j.V, e2), inner(m, x, j.DV, e1), inner(m, x, j.DV, e2);
  }
  Eigen::HouseholderQR<Eigen::Matrix<double, 4, 2>> qr(B);
  return qr.householderQ() * Eigen::Matrix<double, 4, 2>::Identity();
}

ReturnResult return_map(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                        const PhaseState& s_in, const ReturnOptions& opt) {
  const PhaseState s = make_state(s_in.x, s_in.v);
  require(std::abs(sec.crossing(s.x)) <= 1e-8, "return_map: start point is not on the section");
  require(std::abs(g_speed(m, s) - sec.speed()) <= 1e-8 * std::max(1.0, sec.speed()),
          "return_map: start point is not on the section's energy level");
  double horizon = opt.horizon;
  if (horizon <= 0.0) horizon = sec.period_hint() > 0.0 ? 10.0 * sec.period_hint() : 100.0;

  bool negative = false;
  IntegrateOptions io;
  io.tol = opt.tol;
  io.kind = sec.kind();
  io.stop = [&](const PhaseState& p) {
    const double g = sec.crossing(p.x);
    if (g < 0.0) negative = true;
    return negative && g >= 0.0;
  };
  const Trajectory tr = integrate(m, k, s, horizon, io);
  if (!tr.stopped_early) fail(ErrorKind::no_return, "return_map: no return to the section within the horizon");

  // Bracket on the last step with dense output, then polish from the accepted state.
  const std::size_t n = tr.times.size() - 1;
  double a = tr.times[n - 1], b = tr.times[n];
  double ga = sec.crossing(tr.states[n - 1].x), gb = sec.crossing(tr.states[n].x);
  for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, b); ++it) {
    double c = a - ga * (b - a) / (gb - ga);
    if (!(c > a && c < b) || it % 3 == 2) c = 0.5 * (a + b);
    const double gc = sec.crossing(tr.at(c).x);
    if (gc < 0.0) {
      a = c;
      ga = gc;
    } else {
      b = c;
      gb = gc;
    }
    if (gc == 0.0) break;
  }
  double t = (ga == gb) ? b : a - ga * (b - a) / (gb - ga);
  PhaseState p = tr.states[n - 1];
  const double dt0 = t - tr.times[n - 1];
  if (dt0 > 0.0) {
    IntegrateOptions fine;
    fine.tol = opt.tol;
    fine.kind = sec.kind();
    p = integrate(m, k, p, dt0, fine).final();
  }
  for (int it = 0; it < 4; ++it) {
    const Vec3 acc = flow_accel(sec.kind(), m, k, p.x, p.v);
    const double g = sec.crossing(p.x), gd = p.v.dot(sec.normal()), gdd = acc.dot(sec.normal());
    double dt = -g / gd;
    dt = -g / (gd + 0.5 * gdd * dt);
    p = make_state(p.x + p.v * dt + 0.5 * acc * dt * dt, p.v + acc * dt);
    t += dt;
    if (std::abs(dt) < 1e-16) break;
  }
  ReturnResult r;
  r.z = sec.coords(p);
  r.state = sec.point(m, r.z);
  r.time = t;
  return r;
}

ReturnResult return_map(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                        const Eigen::Vector2d& z, const ReturnOptions& opt) {
  return return_map(m, k, sec, sec.point(m, z), opt);
}

Eigen::Matrix2d linearized_return(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                  const Monodromy& M) {
  const PhaseState& b = sec.base();
  require((M.base.x - b.x).norm() <= 1e-10 && (M.base.v - b.v).norm() <= 1e-10 * std::max(1.0, b.v.norm()),
          "linearized_return: monodromy is not based at the section point");
  const auto cols = sec.tangent(m, Eigen::Vector2d::Zero());
  const Vec3 acc = flow_accel(sec.kind(), m, k, b.x, b.v);
  Eigen::Matrix<double, 6, 2> A;
  Eigen::Matrix<double, 6, 2> R;
  for (int i = 0; i < 2; ++i) {
    A.col(i) << cols[i].dx, cols[i].dv;
    const JacobiState j = from_ambient(m, b, cols[i]);
    const JacobiState jt = M.field(M.matrix * M.coords(m, j));
    PhaseVariation d = to_ambient(m, b, jt);
    // Slide along the flow back onto the section's tangent plane.
    const double s = d.dx.dot(sec.normal()) / b.v.dot(sec.normal());
    d.dx -= s * b.v;
    d.dv -= s * acc;
    R.col(i) << d.dx, d.dv;
  }
  return A.colPivHouseholderQr().solve(R);
}

Eigen::Matrix2d linearized_return(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                  double period, double tol) {
  IntegrateOptions io;
  io.tol = std::min(tol, 1e-12);
  io.kind = sec.kind();
  const Trajectory orbit = integrate(m, k, sec.base(), period, io);
  return linearized_return(m, k, sec, monodromy(m, k, orbit, tol));
}

const char* to_string(IndexMethod m) { return m == IndexMethod::sign_det ? "sign_det" : "winding"; }

IndexResult index_from_linearization(const Eigen::Matrix2d& dP) {
  const double D = (Eigen::Matrix2d::Identity() - dP).determinant();
  if (std::abs(D) <= kDegeneracyThreshold)
    fail(ErrorKind::degenerate, "fixed point is degenerate: |det(dP - I)| = " + std::to_string(std::abs(D)));
  IndexResult r;
  r.index = D > 0.0 ? 1 : -1;
  r.method = IndexMethod::sign_det;
  r.certificate = std::abs(D);
  return r;
}

IndexResult winding_index(const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& F, double radius,
                          double noise) {
  require(radius > 0.0, "winding_index: radius must be positive");
  for (int N : {64, 128}) {
    std::vector<double> ang(N);
    double cert = std::numeric_limits<double>::infinity();
    for (int j = 0; j < N; ++j) {
      const double a = 2 * M_PI * j / N;
      const Eigen::Vector2d f = F(radius * Eigen::Vector2d(std::cos(a), std::sin(a)));
      cert = std::min(cert, f.norm());
      ang[j] = std::atan2(f[1], f[0]);
    }
    if (!(cert > 10.0 * noise))
      fail(ErrorKind::uncertified, "winding index: min |P(z) - z| = " + std::to_string(cert) +
                                       " does not clear 10x the noise " + std::to_string(noise));
    double total = 0.0, worst = 0.0;
    for (int j = 0; j < N; ++j) {
      const double d = wrap_angle(ang[(j + 1) % N] - ang[j]);
      worst = std::max(worst, std::abs(d));
      total += d;
    }
    if (worst > M_PI / 2 && N == 64) continue;
    if (worst >= M_PI * 0.999) fail(ErrorKind::uncertified, "winding index: probe circle too coarse");
    IndexResult r;
    r.index = static_cast<int>(std::lround(total / (2 * M_PI)));
    r.method = IndexMethod::winding;
    r.certificate = cert;
    r.radius = radius;
    r.probes = N;
    return r;
  }
  fail(ErrorKind::uncertified, "winding index: unreachable");
}

IndexResult fixed_point_index(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                              double period, double radius, const ReturnOptions& opt) {
  const Eigen::Matrix2d dP = linearized_return(m, k, sec, period);
  IndexResult r;
  if (std::abs((dP - Eigen::Matrix2d::Identity()).determinant()) > kDegeneracyThreshold) {
    r = index_from_linearization(dP);
  } else {
    const double noise = std::max(return_map(m, k, sec, Eigen::Vector2d::Zero(), opt).z.norm(), 1e-13);
    r = winding_index([&](const Eigen::Vector2d& z) { return Eigen::Vector2d(return_map(m, k, sec, z, opt).z - z); },
                      radius, noise);
  }
  if (r.index > 1)
    fail(ErrorKind::invariant, "fixed-point index " + std::to_string(r.index) +
                                   " exceeds 1, contradicting area preservation");
  return r;
}

int orbit_degree(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& orbit, double tilt,
                 double radius) {
  const Section sec(m, orbit.initial(), tilt, orbit.kind, orbit.duration());
  const int d = -fixed_point_index(m, k, sec, orbit.duration(), radius).index;
  if (d < -1) fail(ErrorKind::invariant, "orbit degree below -1");
  return d;
}

}  // namespace magorbit
