#include "magorbit/magnetic_flow.hpp"

#include <algorithm>
#include <cmath>

#include "magorbit/errors.hpp"

namespace magorbit {

const char* to_string(FlowKind kind) { return kind == FlowKind::prescribed ? "prescribed" : "magnetic"; }

PhaseState make_state(const Vec3& x, const Vec3& v) {
  const Vec3 xn = SurfacePoint(x).x();
  return {xn, tangent_part(xn, v)};
}

void check_state(const PhaseState& s, double tol) {
  require(std::abs(s.x.norm() - 1.0) <= tol, "phase state: |x| != 1");
  require(std::abs(s.x.dot(s.v)) <= tol * std::max(1.0, s.v.norm()), "phase state: v not tangent");
}

double g_speed(const ConformalMetric& m, const Vec3& x, const Vec3& v) { return std::exp(m.u(x)) * v.norm(); }
double g_speed(const ConformalMetric& m, const PhaseState& s) { return g_speed(m, s.x, s.v); }

PhaseState with_g_speed(const ConformalMetric& m, const PhaseState& s, double c) {
  const double sp = g_speed(m, s);
  require(sp > 0.0, "with_g_speed: zero velocity");
  return {s.x, s.v * (c / sp)};
}

Vec3 flow_accel(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const Vec3& x, const Vec3& v) {
  // D_t v = target, and D_t v = xddot + connection(v, v).
  double coef = k(x);
  if (kind == FlowKind::prescribed) coef *= g_speed(m, x, v);
  return coef * x.cross(v) - connection(m, x, v, v);
}

FlowRhs flow_rhs(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s) {
  return {s.v, flow_accel(kind, m, k, s.x, s.v)};
}

FlowRhs prescribed_rhs(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s) {
  return flow_rhs(FlowKind::prescribed, m, k, s);
}

FlowRhs magnetic_rhs(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s) {
  return flow_rhs(FlowKind::magnetic, m, k, s);
}

double geodesic_curvature(const ConformalMetric& m, const Vec3& x, const Vec3& v, const Vec3& accel) {
  const Vec3 dv = covariant_accel(m, x, v, accel);
  const double s = g_speed(m, x, v);
  return inner(m, x, dv, x.cross(v)) / (s * s * s);
}

PhaseState Trajectory::at(double t) const {
  require(solution_ != nullptr, "trajectory has no dense output");
  const double ts = t / time_scale_;
  Eigen::VectorXd y = solution_->eval(ts);
  return {y.head<3>(), y.segment<3>(3) / time_scale_};
}

Trajectory integrate(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s0_in, double T,
                     const IntegrateOptions& opt) {
  require(T > 0.0, "integrate: T must be positive");
  require(opt.tol > 0.0, "integrate: tol must be positive");
  const PhaseState s0 = make_state(s0_in.x, s0_in.v);
  require(s0.v.norm() > 0.0, "integrate: zero initial velocity");
  const double speed0 = g_speed(m, s0);
  const FlowKind kind = opt.kind;

  OdeRhs rhs = [&](double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
    const Vec3 x = y.head<3>();
    const Vec3 v = y.segment<3>(3);
    dy.resize(6);
    dy.head<3>() = v;
    dy.segment<3>(3) = flow_accel(kind, m, k, x, v);
  };
  double drift = 0.0;
  OdeProjection project = [&](Eigen::VectorXd& y) {
    Vec3 x = y.head<3>().normalized();
    Vec3 v = tangent_part(x, y.segment<3>(3));
    const double sp = g_speed(m, x, v);
    drift = std::max(drift, std::abs(sp - speed0));
    if (opt.restore_speed && sp > 0.0) v *= speed0 / sp;
    y.head<3>() = x;
    y.segment<3>(3) = v;
  };
  Eigen::VectorXd y0(6);
  y0 << s0.x, s0.v;
  OdeOptions o;
  o.tol = opt.tol;
  o.max_steps = opt.max_steps;
  if (opt.h_max > 0.0) o.h_max = opt.h_max;
  o.output_times = opt.output_times;
  std::sort(o.output_times.begin(), o.output_times.end());
  OdeStop stop;
  if (opt.stop)
    stop = [&](const OdeSolution& sol) {
      const auto& y = sol.states.back();
      return opt.stop(PhaseState{y.head<3>(), y.segment<3>(3)});
    };
  auto sol = std::make_shared<OdeSolution>(dopri5(rhs, y0, 0.0, T, o, project, stop));

  Trajectory tr;
  tr.metric_id = m.id();
  tr.k_id = k.id();
  tr.kind = kind;
  tr.tol = opt.tol;
  tr.speed = speed0;
  tr.drift = drift;
  tr.rhs_evaluations = sol->rhs_evaluations;
  tr.times = sol->times;
  tr.states.reserve(sol->states.size());
  for (const auto& y : sol->states) tr.states.push_back({y.head<3>(), y.segment<3>(3)});
  tr.output_times = sol->output_times;
  for (const auto& y : sol->outputs) tr.outputs.push_back({y.head<3>(), y.segment<3>(3)});
  tr.stopped_early = sol->stopped_early;
  const bool failed = sol->failed;
  tr.solution_ = std::move(sol);
  if (failed) {
    throw IntegrationFailure("integrate: step-size underflow at t = " + std::to_string(tr.t1()),
                             std::make_shared<Trajectory>(tr));
  }
  return tr;
}

Trajectory reparametrize_to_energy(const ConformalMetric& m, const Trajectory& traj, double c) {
  require(c > 0.0, "reparametrize_to_energy: c must be positive");
  require(traj.kind == FlowKind::prescribed, "reparametrize_to_energy: expects a prescribed-flow trajectory");
  const double s0 = traj.speed;
  double dev = 0.0;
  for (const auto& s : traj.states) dev = std::max(dev, std::abs(g_speed(m, s) - s0));
  const double bound = std::max({10.0 * traj.tol * traj.duration(), 2.0 * traj.drift, 1e-9 * s0});
  require(dev <= bound, "reparametrize_to_energy: input speed is not constant");
  // New time tau = a t with a = |v|_g / c; velocities scale by 1/a.
  const double a = s0 / c;
  Trajectory out = traj;
  out.kind = FlowKind::magnetic;
  out.k_id = "(" + traj.k_id + ")*" + std::to_string(c);
  out.time_scale_ = traj.time_scale_ * a;
  out.speed = c;
  out.drift = traj.drift / a;
  for (auto& t : out.times) t *= a;
  for (auto& t : out.output_times) t *= a;
  for (auto& s : out.states) s.v /= a;
  for (auto& s : out.outputs) s.v /= a;
  return out;
}

}  // namespace magorbit
