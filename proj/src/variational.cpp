#include "magorbit/variational.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "magorbit/errors.hpp"

namespace magorbit {

namespace {

double dk(const CurvatureFunction& k, const Vec3& x, const Vec3& V) {
  if (k.constant_value()) return 0.0;
  return k.gradient(x).dot(V);
}

void require_gradient(const CurvatureFunction& k) {
  if (!k.constant_value() && !k.has_gradient())
    fail(ErrorKind::unsupported, "Jacobi flow needs the gradient of curvature function '" + k.id() + "'");
}

PhaseState project_base(const Vec3& x_in, const Vec3& v_in) {
  const Vec3 x = x_in.normalized();
  return {x, tangent_part(x, v_in)};
}

}  // namespace

PhaseVariation to_ambient(const ConformalMetric& m, const PhaseState& s, const JacobiState& j) {
  return {j.V, j.DV - connection(m, s.x, s.v, j.V)};
}

JacobiState from_ambient(const ConformalMetric& m, const PhaseState& s, const PhaseVariation& d) {
  const Vec3 V = tangent_part(s.x, d.dx);
  return {V, d.dv + connection(m, s.x, s.v, V)};
}

Vec3 jacobi_accel(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s,
                  const JacobiState& j) {
  const Vec3& x = s.x;
  const Vec3& v = s.v;
  const double K = gauss_curvature(m, x);
  const double kx = k(x);
  const double ss = inner(m, x, v, v);
  // Curvature term -R(V, v)v for a surface.
  Vec3 out = -K * (ss * j.V - inner(m, x, j.V, v) * v);
  const Vec3 Jv = x.cross(v);
  if (kind == FlowKind::prescribed) {
    const double sp = std::sqrt(ss);
    out += sp * kx * x.cross(j.DV) + sp * dk(k, x, j.V) * Jv + (inner(m, x, j.DV, v) / sp) * kx * Jv;
  } else {
    out += kx * x.cross(j.DV) + dk(k, x, j.V) * Jv;
  }
  return out;
}

namespace {

void jacobi_rhs_block(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& b,
                      const double* y, double* dy) {
  const Vec3 V(y[0], y[1], y[2]);
  const Vec3 W(y[3], y[4], y[5]);
  const Vec3 dV = W - connection(m, b.x, b.v, V);
  const Vec3 dW = jacobi_accel(kind, m, k, b, {V, W}) - connection(m, b.x, b.v, W);
  for (int i = 0; i < 3; ++i) {
    dy[i] = dV[i];
    dy[3 + i] = dW[i];
  }
}

JacobiState column_at(const Eigen::VectorXd& y, std::size_t offset, const Vec3& x) {
  return {tangent_part(x, y.segment<3>(offset)), tangent_part(x, y.segment<3>(offset + 3))};
}

JacobiEvolution run_joint(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s0,
                          double T, const std::vector<JacobiState>& init, double tol) {
  const std::size_t nc = init.size();
  const double speed0 = g_speed(m, s0);
  Eigen::VectorXd y0(6 + 6 * nc);
  y0.head<3>() = s0.x;
  y0.segment<3>(3) = s0.v;
  for (std::size_t c = 0; c < nc; ++c) {
    y0.segment<3>(6 + 6 * c) = tangent_part(s0.x, init[c].V);
    y0.segment<3>(9 + 6 * c) = tangent_part(s0.x, init[c].DV);
  }
  OdeRhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(y.size());
    const PhaseState b{y.head<3>(), y.segment<3>(3)};
    dy.head<3>() = b.v;
    dy.segment<3>(3) = flow_accel(kind, m, k, b.x, b.v);
    for (std::size_t c = 0; c < nc; ++c) jacobi_rhs_block(kind, m, k, b, y.data() + 6 + 6 * c, dy.data() + 6 + 6 * c);
  };
  OdeProjection project = [&](Eigen::VectorXd& y) {
    PhaseState b = project_base(y.head<3>(), y.segment<3>(3));
    const double sp = g_speed(m, b);
    if (sp > 0.0) b.v *= speed0 / sp;
    y.head<3>() = b.x;
    y.segment<3>(3) = b.v;
    for (std::size_t c = 0; c < nc; ++c) {
      y.segment<3>(6 + 6 * c) = tangent_part(b.x, y.segment<3>(6 + 6 * c));
      y.segment<3>(9 + 6 * c) = tangent_part(b.x, y.segment<3>(9 + 6 * c));
    }
  };
  OdeOptions o;
  o.tol = tol;
  const OdeSolution sol = dopri5(rhs, y0, 0.0, T, o, project);
  if (sol.failed) fail(ErrorKind::integration, "Jacobi flow: step-size underflow");
  JacobiEvolution ev;
  ev.joint = true;
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    const auto& y = sol.states[i];
    const PhaseState b{y.head<3>(), y.segment<3>(3)};
    ev.times.push_back(sol.times[i]);
    ev.base.push_back(b);
    std::vector<JacobiState> cols(nc);
    for (std::size_t c = 0; c < nc; ++c) cols[c] = column_at(y, 6 + 6 * c, b.x);
    ev.columns.push_back(std::move(cols));
  }
  return ev;
}

JacobiEvolution run_decoupled(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                              const std::vector<JacobiState>& init, double tol) {
  const std::size_t nc = init.size();
  const FlowKind kind = traj.kind;
  const double t0 = traj.t0();
  auto base_at = [&](double t) {
    const PhaseState s = traj.at(std::min(t0 + t, traj.t1()));
    return project_base(s.x, s.v);
  };
  const PhaseState b0 = base_at(0.0);
  Eigen::VectorXd y0(6 * nc);
  for (std::size_t c = 0; c < nc; ++c) {
    y0.segment<3>(6 * c) = tangent_part(b0.x, init[c].V);
    y0.segment<3>(3 + 6 * c) = tangent_part(b0.x, init[c].DV);
  }
  OdeRhs rhs = [&](double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    dy.resize(y.size());
    const PhaseState b = base_at(t);
    for (std::size_t c = 0; c < nc; ++c) jacobi_rhs_block(kind, m, k, b, y.data() + 6 * c, dy.data() + 6 * c);
  };
  OdeOptions o;
  o.tol = tol;
  // Coefficients are only piecewise smooth across the base curve's steps.
  o.output_times = std::vector<double>(traj.times.begin() + 1, traj.times.end());
  for (auto& t : o.output_times) t -= t0;
  const OdeSolution sol = dopri5(rhs, y0, 0.0, traj.duration(), o);
  if (sol.failed) fail(ErrorKind::integration, "Jacobi flow: step-size underflow");
  JacobiEvolution ev;
  for (std::size_t i = 0; i < sol.times.size(); ++i) {
    const PhaseState b = base_at(sol.times[i]);
    ev.times.push_back(sol.times[i]);
    ev.base.push_back(b);
    std::vector<JacobiState> cols(nc);
    for (std::size_t c = 0; c < nc; ++c) cols[c] = column_at(sol.states[i], 6 * c, b.x);
    ev.columns.push_back(std::move(cols));
  }
  return ev;
}

}  // namespace

JacobiEvolution jacobi_evolution(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                                 const std::vector<JacobiState>& init, const JacobiOptions& opt) {
  require(!init.empty(), "Jacobi flow: no initial fields");
  require(opt.tol > 0.0, "Jacobi flow: tol must be positive");
  require_gradient(k);
  if (opt.tol < opt.joint_below)
    return run_joint(traj.kind, m, k, traj.initial(), traj.duration(), init, opt.tol);
  return run_decoupled(m, k, traj, init, opt.tol);
}

JacobiEvolution jacobi_evolution(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k,
                                 const PhaseState& s0, double T, const std::vector<JacobiState>& init,
                                 const JacobiOptions& opt) {
  require(!init.empty(), "Jacobi flow: no initial fields");
  require(T > 0.0, "Jacobi flow: T must be positive");
  require(opt.tol > 0.0, "Jacobi flow: tol must be positive");
  require_gradient(k);
  return run_joint(kind, m, k, make_state(s0.x, s0.v), T, init, opt.tol);
}

JacobiState jacobi_prescribed_flow(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                                   const JacobiState& init, const JacobiOptions& opt) {
  require(traj.kind == FlowKind::prescribed, "jacobi_prescribed_flow: trajectory is not a prescribed-flow solution");
  return jacobi_evolution(m, k, traj, {init}, opt).final()[0];
}

JacobiState jacobi_magnetic_flow(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                                 const JacobiState& init, const JacobiOptions& opt) {
  require(traj.kind == FlowKind::magnetic, "jacobi_magnetic_flow: trajectory is not a magnetic-flow solution");
  return jacobi_evolution(m, k, traj, {init}, opt).final()[0];
}

double pairing_drift(const ConformalMetric& m, const JacobiEvolution& ev, std::size_t column) {
  require(!ev.times.empty() && column < ev.columns.front().size(), "pairing_drift: bad column");
  auto pairing = [&](std::size_t i) {
    return inner(m, ev.base[i].x, ev.columns[i][column].DV, ev.base[i].v);
  };
  const double p0 = pairing(0);
  double d = 0.0;
  for (std::size_t i = 1; i < ev.times.size(); ++i) d = std::max(d, std::abs(pairing(i) - p0));
  return d;
}

Eigen::Vector4d Monodromy::coords(const ConformalMetric& m, const JacobiState& j) const {
  const Vec3& x = base.x;
  return {inner(m, x, j.V, e1), inner(m, x, j.V, e2), inner(m, x, j.DV, e1), inner(m, x, j.DV, e2)};
}

JacobiState Monodromy::field(const Eigen::Vector4d& c) const {
  return {c[0] * e1 + c[1] * e2, c[2] * e1 + c[3] * e2};
}

Eigen::Vector4d Monodromy::flow_vector(const ConformalMetric& m, const CurvatureFunction& k) const {
  const Vec3 dv = flow_accel(kind, m, k, base.x, base.v);
  return coords(m, {base.v, covariant_accel(m, base.x, base.v, dv)});
}

Eigen::Matrix<double, 4, 2> Monodromy::section_basis(const ConformalMetric& m, const CurvatureFunction& k) const {
  Eigen::Matrix<double, 4, 2> span;
  span.col(0) = flow_vector(m, k);
  span.col(1) = coords(m, {Vec3::Zero(), base.v});
  Eigen::JacobiSVD<Eigen::Matrix<double, 4, 2>> svd(span, Eigen::ComputeFullU);
  return svd.matrixU().rightCols<2>();
}

Eigen::Matrix2d Monodromy::reduced_block(const ConformalMetric& m, const CurvatureFunction& k) const {
  const auto B = section_basis(m, k);
  return B.transpose() * matrix * B;
}

Eigen::Vector4cd Monodromy::eigenvalues() const { return Eigen::EigenSolver<Eigen::Matrix4d>(matrix).eigenvalues(); }

Monodromy monodromy(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& orbit, double tol) {
  const PhaseState& a = orbit.initial();
  const PhaseState& b = orbit.final();
  const double gap = std::max((a.x - b.x).norm(), (a.v - b.v).norm() / std::max(1.0, a.v.norm()));
  require(gap <= 1e-8, "monodromy: orbit does not close (gap " + std::to_string(gap) + ")");
  Monodromy M;
  M.period = orbit.duration();
  M.base = a;
  M.kind = orbit.kind;
  const double sp = g_speed(m, a);
  require(sp > 0.0, "monodromy: zero velocity");
  M.e1 = a.v / sp;
  M.e2 = a.x.cross(M.e1);
  std::vector<JacobiState> init;
  for (int i = 0; i < 4; ++i) init.push_back(M.field(Eigen::Vector4d::Unit(i)));
  const auto ev = jacobi_evolution(orbit.kind, m, k, a, M.period, init, {tol});
  for (int i = 0; i < 4; ++i) M.matrix.col(i) = M.coords(m, ev.final()[i]);
  return M;
}

void check_frame(const LatitudeFrame& f) {
  const double e = std::max({std::abs(f.v0.norm() - 1), std::abs(f.v1.norm() - 1), std::abs(f.w.norm() - 1),
                             std::abs(f.v0.dot(f.v1)), std::abs(f.v0.dot(f.w)), std::abs(f.v1.dot(f.w))});
  require(e <= 1e-10, "latitude frame is not orthonormal");
  require((f.v1.cross(f.v0) - f.w).norm() <= 1e-10, "latitude frame is not positively oriented (need w = v1 x v0)");
}

double latitude_curvature(double r) {
  require(r > 0.0 && r < 1.0, "latitude radius must lie in (0, 1)");
  return std::sqrt(1.0 - r * r) / r;
}

double latitude_radius(double k0) {
  require(k0 > 0.0, "latitude curvature must be positive");
  return 1.0 / std::sqrt(1.0 + k0 * k0);
}

PhaseState latitude_state(double r, const LatitudeFrame& f, double t) {
  const double h = std::sqrt(1.0 - r * r);
  const double c = std::cos(2 * M_PI * t), s = std::sin(2 * M_PI * t);
  return {h * f.w + r * c * f.v1 + r * s * f.v0, 2 * M_PI * r * (-s * f.v1 + c * f.v0)};
}

Vec3 latitude_accel(double r, const LatitudeFrame& f, double t) {
  const double c = std::cos(2 * M_PI * t), s = std::sin(2 * M_PI * t);
  return -4 * M_PI * M_PI * r * (c * f.v1 + s * f.v0);
}

std::array<JacobiState, 4> kernel_fields(double r, const LatitudeFrame& f, double t) {
  check_frame(f);
  const double k0 = latitude_curvature(r);
  const double h = std::sqrt(1.0 - r * r);
  const double c = std::cos(2 * M_PI * t), s = std::sin(2 * M_PI * t);
  const PhaseState a = latitude_state(r, f, t);
  // Round-sphere covariant derivative of the velocity: P(alpha'') = alpha'' + |alpha'|^2 alpha.
  const Vec3 Dv = latitude_accel(r, f, t) + a.v.squaredNorm() * a.x;
  const Vec3 wt = f.w - h * a.x;  // tangential part of w
  std::array<JacobiState, 4> W;
  W[0] = {t * a.v, a.v + t * Dv};
  W[1] = {a.v, Dv};
  W[2] = {r * k0 * f.v1 - r * c * f.w, 2 * M_PI * r * s * wt};
  W[3] = {r * k0 * f.v0 - r * s * f.w, -2 * M_PI * r * c * wt};
  return W;
}

}  // namespace magorbit
