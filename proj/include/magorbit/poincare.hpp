#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

#include "magorbit/curvature.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/variational.hpp"

namespace magorbit {

// Transversal section through a phase state theta on its energy level.
//
// Positions are restricted to the great circle {<y, n> = 0}, where the plane normal
// n = cos(tilt) v + sin(tilt) J v (v the unit direction at theta). Section
// coordinates z = (z1, z2): z1 is arc length along that great circle from x(theta),
// z2 rotates the velocity direction away from theta's. The g-speed is fixed.
class Section {
 public:
  Section(const ConformalMetric& m, const PhaseState& theta, double tilt = 0.0,
          FlowKind kind = FlowKind::prescribed, double period_hint = 0.0);

  PhaseState point(const ConformalMetric& m, const Eigen::Vector2d& z) const;
  // Inverse chart; ignores the speed of s.
  Eigen::Vector2d coords(const PhaseState& s) const;
  double crossing(const Vec3& x) const { return x.dot(normal_); }
  // Chart derivative columns as ambient phase variations at z.
  std::array<PhaseVariation, 2> tangent(const ConformalMetric& m, const Eigen::Vector2d& z) const;
  // Orthonormalized chart columns in the monodromy frame coordinates at theta.
  Eigen::Matrix<double, 4, 2> basis(const ConformalMetric& m) const;

  const PhaseState& base() const noexcept { return base_; }
  const Vec3& normal() const noexcept { return normal_; }
  double speed() const noexcept { return speed_; }
  double tilt() const noexcept { return tilt_; }
  FlowKind kind() const noexcept { return kind_; }
  double period_hint() const noexcept { return period_hint_; }

 private:
  PhaseState base_;
  Vec3 normal_;
  Vec3 along_;  // unit tangent of the position circle at x(theta)
  double phase0_;
  double speed_;
  double tilt_;
  FlowKind kind_;
  double period_hint_;
};

struct ReturnOptions {
  double tol = 1e-12;
  double horizon = 0.0;  // 0 = 10 x the section's period hint (or 100 if none)
};

struct ReturnResult {
  PhaseState state;
  Eigen::Vector2d z = Eigen::Vector2d::Zero();
  double time = 0.0;
};

// First ascending crossing of the section after the curve has left it on the negative side.
ReturnResult return_map(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                        const PhaseState& s, const ReturnOptions& opt = {});
ReturnResult return_map(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                        const Eigen::Vector2d& z, const ReturnOptions& opt = {});

// dP at the section base, which must lie on a closed orbit of period T.
Eigen::Matrix2d linearized_return(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                  double period, double tol = 1e-11);
Eigen::Matrix2d linearized_return(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                  const Monodromy& M);

enum class IndexMethod { sign_det, winding };
const char* to_string(IndexMethod m);

struct IndexResult {
  int index = 0;
  IndexMethod method = IndexMethod::sign_det;
  double certificate = 0.0;
  double radius = 0.0;
  int probes = 0;
};

// sign det(I - dP); throws a degenerate error when |det(dP - I)| is below the threshold.
inline constexpr double kDegeneracyThreshold = 1e-6;
IndexResult index_from_linearization(const Eigen::Matrix2d& dP);

// Winding number of F over the circle of the given radius, starting with 64 probes and
// doubling once if consecutive samples turn by more than a quarter turn. Throws an
// uncertified error if min |F| <= 10 noise.
IndexResult winding_index(const std::function<Eigen::Vector2d(const Eigen::Vector2d&)>& F, double radius,
                          double noise);

// Index of the section base as a fixed point of the return map: sign_det when dP is
// nondegenerate, else winding of P(z) - z on the probe circle.
IndexResult fixed_point_index(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                              double period, double radius, const ReturnOptions& opt = {});

// Degree of a closed orbit as a zero of the flow's vector field: minus the fixed-point
// index of its return map on a section through orbit.initial().
int orbit_degree(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& orbit, double tilt = 0.0,
                 double radius = 1e-3);

}  // namespace magorbit
