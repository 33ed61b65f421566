#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "magorbit/curvature.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/sphere_geometry.hpp"

namespace magorbit {

// A Jacobi field sample: V and its covariant derivative D_t V, both tangent at the base point.
struct JacobiState {
  Vec3 V = Vec3::Zero();
  Vec3 DV = Vec3::Zero();
};

// First-order variation of an ambient phase state, (d/de x, d/de v).
struct PhaseVariation {
  Vec3 dx = Vec3::Zero();
  Vec3 dv = Vec3::Zero();
};

PhaseVariation to_ambient(const ConformalMetric& m, const PhaseState& s, const JacobiState& j);
JacobiState from_ambient(const ConformalMetric& m, const PhaseState& s, const PhaseVariation& d);

// D_t^2 V prescribed by the linearized equation of the given flow at (x, v).
Vec3 jacobi_accel(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s,
                  const JacobiState& j);

struct JacobiOptions {
  double tol = 1e-10;
  // Below this tolerance the base curve is re-integrated jointly with the Jacobi
  // fields instead of being read from the trajectory's dense output.
  double joint_below = 1e-8;
};

struct JacobiEvolution {
  std::vector<double> times;  // relative to the trajectory start
  std::vector<PhaseState> base;
  std::vector<std::vector<JacobiState>> columns;  // columns[i][c] at times[i]
  bool joint = false;

  const std::vector<JacobiState>& final() const { return columns.back(); }
};

// Propagates several Jacobi fields along traj (for its whole duration) under the
// linearization of traj.kind. Requires a k gradient unless k is constant.
JacobiEvolution jacobi_evolution(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                                 const std::vector<JacobiState>& init, const JacobiOptions& opt = {});

// Joint propagation from a phase state for time T, without an existing trajectory.
JacobiEvolution jacobi_evolution(FlowKind kind, const ConformalMetric& m, const CurvatureFunction& k,
                                 const PhaseState& s0, double T, const std::vector<JacobiState>& init,
                                 const JacobiOptions& opt = {});

JacobiState jacobi_prescribed_flow(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                                   const JacobiState& init, const JacobiOptions& opt = {});
JacobiState jacobi_magnetic_flow(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& traj,
                                 const JacobiState& init, const JacobiOptions& opt = {});

// max_t |<DV(t), v(t)>_g - <DV(0), v(0)>_g| for one column of an evolution.
double pairing_drift(const ConformalMetric& m, const JacobiEvolution& ev, std::size_t column = 0);

// Period map of the linearized flow in the g-orthonormal frame
// e1 = v/|v|_g, e2 = J e1 at the orbit start; coordinates (V.e1, V.e2, DV.e1, DV.e2).
struct Monodromy {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Identity();
  double period = 0.0;
  PhaseState base;
  Vec3 e1 = Vec3::Zero();
  Vec3 e2 = Vec3::Zero();
  FlowKind kind = FlowKind::prescribed;

  Eigen::Vector4d coords(const ConformalMetric& m, const JacobiState& j) const;
  JacobiState field(const Eigen::Vector4d& c) const;
  // Coordinates of the flow direction (v, D_t v).
  Eigen::Vector4d flow_vector(const ConformalMetric& m, const CurvatureFunction& k) const;
  // Orthonormal basis of the complement of span{(v, Dv), (0, v)}; on it the
  // compression of the monodromy is the linearized return map.
  Eigen::Matrix<double, 4, 2> section_basis(const ConformalMetric& m, const CurvatureFunction& k) const;
  Eigen::Matrix2d reduced_block(const ConformalMetric& m, const CurvatureFunction& k) const;
  Eigen::Vector4cd eigenvalues() const;
};

// Requires the orbit to close within 1e-8 in phase space.
Monodromy monodromy(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& orbit,
                    double tol = 1e-11);

// Frame of the latitude family; positively oriented means w = v1 x v0.
struct LatitudeFrame {
  Vec3 v0 = kE2;
  Vec3 v1 = kE1;
  Vec3 w = kE3;
};
void check_frame(const LatitudeFrame& f);

// Curvature of the latitude circle of radius r (and its inverse).
double latitude_curvature(double r);
double latitude_radius(double k0);

// The period-1 latitude solution sqrt(1-r^2) w + r cos(2 pi t) v1 + r sin(2 pi t) v0.
PhaseState latitude_state(double r, const LatitudeFrame& f, double t);
Vec3 latitude_accel(double r, const LatitudeFrame& f, double t);

// W0 = t alpha', W1 = alpha', W2 = r k0 v1 - r cos(2 pi t) w, W3 = r k0 v0 - r sin(2 pi t) w.
std::array<JacobiState, 4> kernel_fields(double r, const LatitudeFrame& f, double t);

}  // namespace magorbit
