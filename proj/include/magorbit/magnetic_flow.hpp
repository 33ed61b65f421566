#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "magorbit/curvature.hpp"
#include "magorbit/ode.hpp"
#include "magorbit/sphere_geometry.hpp"

namespace magorbit {

// prescribed: D_t v = |v|_g k(x) J v   (constant-speed curves of geodesic curvature k)
// magnetic:   D_t v = k(x) J v
enum class FlowKind { prescribed, magnetic };
const char* to_string(FlowKind kind);

struct PhaseState {
  Vec3 x = kE3;
  Vec3 v = Vec3::Zero();
};

// Normalizes x and removes the normal component of v.
PhaseState make_state(const Vec3& x, const Vec3& v);
// Throws a contract violation unless |x| = 1 and <x,v> = 0 within tol.
void check_state(const PhaseState& s, double tol = 1e-10);
double g_speed(const ConformalMetric& m, const PhaseState& s);
double g_speed(const ConformalMetric& m, const Vec3& x, const Vec3& v);
// Same point, velocity rescaled to g-speed c.
PhaseState with_g_speed(const ConformalMetric& m, const PhaseState& s, double c);

struct FlowRhs {
  Vec3 velocity;
  Vec3 accel;  // ambient second derivative
};

FlowRhs prescribed_rhs(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s);
FlowRhs magnetic_rhs(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s);
FlowRhs flow_rhs(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s);
// Ambient acceleration for raw (x, v).
Vec3 flow_accel(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const Vec3& x, const Vec3& v);

struct IntegrateOptions {
  double tol = 1e-10;
  FlowKind kind = FlowKind::prescribed;
  bool restore_speed = true;
  std::vector<double> output_times;  // exact landing times, relative to t = 0
  double h_max = 0.0;                // 0 = unlimited
  long max_steps = 2000000;
  // Checked after every accepted step; returning true ends the integration there.
  std::function<bool(const PhaseState&)> stop;
};

class Trajectory {
 public:
  std::vector<double> times;
  std::vector<PhaseState> states;
  std::vector<double> output_times;
  std::vector<PhaseState> outputs;
  std::string metric_id;
  std::string k_id;
  FlowKind kind = FlowKind::prescribed;
  double tol = 0.0;
  double speed = 0.0;  // g-speed of the initial state
  double drift = 0.0;  // max deviation of |v|_g from `speed` seen before speed restoration
  long rhs_evaluations = 0;
  bool stopped_early = false;

  // Dense output (Dormand-Prince continuous extension) at time t in [t0, t1].
  PhaseState at(double t) const;
  double t0() const { return times.front(); }
  double t1() const { return times.back(); }
  double duration() const { return t1() - t0(); }
  const PhaseState& initial() const { return states.front(); }
  const PhaseState& final() const { return states.back(); }

 private:
  friend Trajectory integrate(const ConformalMetric&, const CurvatureFunction&, const PhaseState&, double,
                              const IntegrateOptions&);
  friend Trajectory reparametrize_to_energy(const ConformalMetric&, const Trajectory&, double);
  std::shared_ptr<const OdeSolution> solution_;
  double time_scale_ = 1.0;  // trajectory time = time_scale * solution time
};

// Integrates for time T from s0. On step-size underflow throws IntegrationFailure
// carrying the partial trajectory.
Trajectory integrate(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s0, double T,
                     const IntegrateOptions& opt = {});

// t -> gamma(c t / |gamma'|_g): a prescribed-flow solution with curvature k becomes a
// magnetic geodesic with field c*k on the energy level |v|_g = c.
Trajectory reparametrize_to_energy(const ConformalMetric& m, const Trajectory& traj, double c);

// Pointwise geodesic curvature <D_t v, J v>_g / |v|_g^3 given the ambient acceleration.
double geodesic_curvature(const ConformalMetric& m, const Vec3& x, const Vec3& v, const Vec3& accel);

}  // namespace magorbit
