#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magorbit/curvature.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/poincare.hpp"

namespace magorbit {

struct ClosedOrbit {
  PhaseState initial;
  double period = 0.0;
  double residual = 0.0;  // max(|x(T) - x(0)|, |v(T) - v(0)|)
  Eigen::Matrix2d dP = Eigen::Matrix2d::Identity();
  std::optional<int> degree;  // empty when the return map is degenerate
  std::optional<IndexResult> index;
  bool simple = false;
  bool simple_inconclusive = false;
  int multiplicity = 1;
  Trajectory trajectory;
  std::string provenance;
  int iterations = 0;
  double condition = 0.0;  // of the final shooting Jacobian

  bool nondegenerate() const { return degree.has_value(); }
};

struct ShootOptions {
  FlowKind kind = FlowKind::prescribed;
  double tol = 1e-12;          // integrator tolerance
  double target = 1e-10;       // residual norm at which Newton stops
  int max_iterations = 40;
  double max_step = 0.25;      // radians, per section coordinate
  double period_window = 0.5;  // T stays within (1 +- window) * guess
  int samples = 256;           // exact output samples stored on the trajectory
  bool classify = true;
  bool winding_fallback = false;  // probe-circle index for degenerate dP
  double winding_radius = 1e-3;
};

// Period of the round-sphere latitude circle with curvature e^u k, at unit g-speed.
double period_guess(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s);

// Newton shooting with the start anchored to a section through the guess and unit g-speed.
ClosedOrbit shoot(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& guess,
                  double period = 0.0, const ShootOptions& opt = {});

// Shooting residual on a section chart: p = (z1, z2, T). The residual is the closure defect
// projected on (v, x cross v) at the start, for position and velocity.
struct ShootingEvaluation {
  Eigen::Vector4d residual = Eigen::Vector4d::Zero();
  Eigen::Matrix<double, 4, 3> jacobian = Eigen::Matrix<double, 4, 3>::Zero();
  PhaseState start, end;
};
ShootingEvaluation shooting_residual(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                     const Eigen::Vector3d& p, const ShootOptions& opt, bool with_jacobian = true);

// Fills dP, index and degree of an orbit from its monodromy.
void classify(const ConformalMetric& m, const CurvatureFunction& k, ClosedOrbit& orbit, const ShootOptions& opt = {});

struct SearchReport {
  std::vector<ClosedOrbit> orbits;
  int seeds = 0;
  int converged = 0;
  int not_simple = 0;
  int duplicates = 0;
  std::map<std::string, int> failures;  // error kind -> count
};

// Seeds: Fibonacci-sphere positions x 8 directions, rotated by a random rotation drawn
// from rng_seed. Keeps simple orbits only, deduplicated.
SearchReport multistart_search(const ConformalMetric& m, const CurvatureFunction& k, int n_seeds,
                               std::uint64_t rng_seed, const ShootOptions& opt = {});
std::vector<PhaseState> seed_states(const ConformalMetric& m, int n_seeds, std::uint64_t rng_seed);

inline constexpr double kDedupThreshold = 1e-5;
// Same geometric orbit after optimal phase alignment?
bool dedup_mod_s1(const ClosedOrbit& a, const ClosedOrbit& b, double threshold = kDedupThreshold);
// The aligned phase-space distance used by dedup_mod_s1.
double orbit_distance(const Trajectory& a, const Trajectory& b);

struct Simplicity {
  bool simple = false;
  bool inconclusive = false;  // near self-contact below the resolution
  double min_separation = 0.0;
};
Simplicity is_simple(const Trajectory& closed, int samples = 1024);
// Same test on a closed polyline of unit vectors.
Simplicity is_simple(const std::vector<Vec3>& loop);
int covering_multiplicity(const Trajectory& closed, int samples = 1024);
int covering_multiplicity(const std::vector<Vec3>& loop);

// Sum of degrees; refuses (invariant error) on degenerate or duplicate members.
int degree_sum(const std::vector<ClosedOrbit>& orbits);

}  // namespace magorbit
