#include "magorbit/loop_field.hpp"

#include <cmath>

#include "magorbit/errors.hpp"
#include "magorbit/magnetic_flow.hpp"

namespace magorbit {

Eigen::MatrixXd spectral_derivative(int n) {
  require(n >= 4 && n % 2 == 0, "spectral_derivative: n must be even and at least 4");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      if (j == k) continue;
      const int d = j - k;
      const double sign = (d % 2 == 0) ? 1.0 : -1.0;
      D(j, k) = sign * M_PI / std::tan(M_PI * d / n);
    }
  return D;
}

LoopGrid::LoopGrid(std::vector<Vec3> points) : points_(std::move(points)) {
  const int n = size();
  require(n >= 8 && n % 2 == 0, "loop: sample count must be even and at least 8");
  for (auto& p : points_) {
    require(p.norm() > 0.0, "loop: zero point");
    p.normalize();
  }
  const double max_gap = 2 * M_PI / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < n; ++j)
    require((points_[(j + 1) % n] - points_[j]).norm() < max_gap, "loop: consecutive samples too far apart");
  D_ = spectral_derivative(n);
  Eigen::MatrixXd X(n, 3);
  for (int j = 0; j < n; ++j) X.row(j) = points_[j].transpose();
  const Eigen::MatrixXd dX = D_ * X, ddX = D_ * dX;
  velocities_.resize(n);
  accelerations_.resize(n);
  double vmax = 0.0, vmin = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    velocities_[j] = tangent_part(points_[j], dX.row(j).transpose());
    accelerations_[j] = ddX.row(j).transpose();
    vmax = std::max(vmax, velocities_[j].norm());
    vmin = std::min(vmin, velocities_[j].norm());
  }
  require(vmin > 1e-10 * std::max(vmax, 1e-300), "loop: velocity vanishes (not a regular curve)");
}

LoopGrid LoopGrid::shifted(double shift) const {
  const int n = size();
  std::vector<Vec3> out(n, Vec3::Zero());
  for (int j = 0; j < n; ++j) {
    const double t = static_cast<double>(j) / n + shift;
    for (int k = 0; k < n; ++k) {
      const double tau = t - static_cast<double>(k) / n;
      const double den = n * std::tan(M_PI * tau);
      const double w = std::abs(den) < 1e-14 ? std::cos(M_PI * n * tau) / std::cos(M_PI * tau)
                                             : std::sin(M_PI * n * tau) / den;
      out[j] += w * points_[k];
    }
  }
  return LoopGrid(std::move(out));
}

LoopGrid LoopGrid::rolled(int samples) const {
  const int n = size();
  std::vector<Vec3> out(n);
  for (int j = 0; j < n; ++j) out[j] = points_[((j + samples) % n + n) % n];
  return LoopGrid(std::move(out));
}

namespace {

struct Frame {
  std::vector<Vec3> e1, e2;  // g-orthonormal
  Eigen::VectorXd speed;     // g-speed
};

Frame moving_frame(const ConformalMetric& m, const LoopGrid& loop) {
  const int n = loop.size();
  Frame f;
  f.e1.resize(n);
  f.e2.resize(n);
  f.speed.resize(n);
  for (int j = 0; j < n; ++j) {
    const Vec3& x = loop.points()[j];
    const Vec3 T = loop.velocities()[j].normalized();
    const double iu = std::exp(-m.u(x));
    f.e1[j] = iu * T;
    f.e2[j] = iu * x.cross(T);
    f.speed[j] = g_speed(m, x, loop.velocities()[j]);
  }
  return f;
}

// Covariant derivative in frame components as a 2n x 2n matrix.
Eigen::MatrixXd covariant_operator(const LoopGrid& loop, const Eigen::VectorXd& omega) {
  const int n = loop.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  A.topLeftCorner(n, n) = loop.derivative();
  A.bottomRightCorner(n, n) = loop.derivative();
  A.topRightCorner(n, n).diagonal() = -omega;
  A.bottomLeftCorner(n, n).diagonal() = omega;
  return A;
}

Eigen::VectorXd stack(const FrameField& f) {
  Eigen::VectorXd v(f.tangential.size() + f.normal.size());
  v << f.tangential, f.normal;
  return v;
}

FrameField unstack(const Eigen::VectorXd& v) {
  const auto n = v.size() / 2;
  return {v.head(n), v.tail(n)};
}

double discrete_norm(const FrameField& f) {
  const auto n = f.tangential.size();
  return std::sqrt((f.tangential.squaredNorm() + f.normal.squaredNorm()) / n);
}

}  // namespace

Eigen::VectorXd frame_rotation_rate(const ConformalMetric& m, const LoopGrid& loop) {
  const int n = loop.size();
  Eigen::VectorXd omega(n);
  for (int j = 0; j < n; ++j) {
    const Vec3 &x = loop.points()[j], &v = loop.velocities()[j];
    omega[j] = geodesic_curvature(m, x, v, loop.accelerations()[j]) * g_speed(m, x, v);
  }
  return omega;
}

FrameField frame_components(const ConformalMetric& m, const LoopGrid& loop, const std::vector<Vec3>& field) {
  const int n = loop.size();
  require(static_cast<int>(field.size()) == n, "frame_components: field size does not match the loop");
  const Frame f = moving_frame(m, loop);
  FrameField out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (int j = 0; j < n; ++j) {
    const Vec3& x = loop.points()[j];
    out.tangential[j] = inner(m, x, field[j], f.e1[j]);
    out.normal[j] = inner(m, x, field[j], f.e2[j]);
  }
  return out;
}

std::vector<Vec3> frame_reconstruct(const ConformalMetric& m, const LoopGrid& loop, const FrameField& c) {
  const Frame f = moving_frame(m, loop);
  std::vector<Vec3> out(loop.size());
  for (int j = 0; j < loop.size(); ++j) out[j] = c.tangential[j] * f.e1[j] + c.normal[j] * f.e2[j];
  return out;
}

FrameField apply_helmholtz(const ConformalMetric& m, const LoopGrid& loop, const FrameField& f) {
  const Eigen::MatrixXd A = covariant_operator(loop, frame_rotation_rate(m, loop));
  const Eigen::VectorXd v = stack(f);
  return unstack(v - A * (A * v));
}

LoopField apply_helmholtz_inverse(const ConformalMetric& m, const LoopGrid& loop, const FrameField& rhs) {
  const int n = loop.size();
  require(rhs.tangential.size() == n && rhs.normal.size() == n, "helmholtz: rhs size does not match the loop");
  const Eigen::MatrixXd A = covariant_operator(loop, frame_rotation_rate(m, loop));
  const Eigen::MatrixXd L = Eigen::MatrixXd::Identity(2 * n, 2 * n) - A * A;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-12))
    fail(ErrorKind::resolution, "helmholtz: collocation matrix condition " + std::to_string(1.0 / rcond) +
                                    " exceeds 1e12");
  const Eigen::VectorXd b = stack(rhs);
  const Eigen::VectorXd x = lu.solve(b);
  const FrameField res = unstack(L * x - b);
  const double rn = discrete_norm(res);
  if (rn > 1e-8 * std::max(1.0, discrete_norm(rhs)))
    fail(ErrorKind::resolution, "helmholtz: residual " + std::to_string(rn) + " above 1e-8");
  LoopField out;
  out.frame = unstack(x);
  out.values = frame_reconstruct(m, loop, out.frame);
  out.norm_h22 = std::sqrt(h22_inner(m, loop, out.frame, out.frame));
  return out;
}

LoopField apply_helmholtz_inverse(const ConformalMetric& m, const LoopGrid& loop, const std::vector<Vec3>& rhs) {
  return apply_helmholtz_inverse(m, loop, frame_components(m, loop, rhs));
}

LoopField x_field(const ConformalMetric& m, const CurvatureFunction& k, const LoopGrid& loop) {
  const int n = loop.size();
  const Frame f = moving_frame(m, loop);
  const Eigen::VectorXd omega = frame_rotation_rate(m, loop);
  const Eigen::VectorXd ds = loop.derivative() * f.speed;
  FrameField rhs{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  // -D_t(velocity) + |velocity| k J velocity, with velocity = s E1 and D_t E1 = omega E2.
  for (int j = 0; j < n; ++j) {
    const double s = f.speed[j];
    rhs.tangential[j] = -ds[j];
    rhs.normal[j] = -s * omega[j] + s * s * k(loop.points()[j]);
  }
  return apply_helmholtz_inverse(m, loop, rhs);
}

LoopField w_field(const ConformalMetric& m, const LoopGrid& loop) {
  const Frame f = moving_frame(m, loop);
  return apply_helmholtz_inverse(m, loop, FrameField{f.speed, Eigen::VectorXd::Zero(loop.size())});
}

double h22_inner(const ConformalMetric& m, const LoopGrid& loop, const FrameField& a, const FrameField& b) {
  const FrameField La = apply_helmholtz(m, loop, a), Lb = apply_helmholtz(m, loop, b);
  return (La.tangential.dot(Lb.tangential) + La.normal.dot(Lb.normal)) / loop.size();
}

double orthogonality_defect(const ConformalMetric& m, const CurvatureFunction& k, const LoopGrid& loop) {
  const LoopField X = x_field(m, k, loop);
  const LoopField W = w_field(m, loop);
  // Floor |X| so a loop that already solves the equation reports pairing noise, not noise / noise.
  const double xn = std::max(X.norm_h22, 1e-6);
  return std::abs(h22_inner(m, loop, X.frame, W.frame)) / (xn * W.norm_h22);
}

}  // namespace magorbit
