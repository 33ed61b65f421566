#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "magorbit/curvature.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/variational.hpp"

namespace magorbit {

// The unperturbed solutions for constant k0 on the round sphere: period-1 latitude
// circles sqrt(1-r^2) w + r cos(2 pi t) v1 + r sin(2 pi t) v0.
struct LatitudeFamily {
  double r = M_SQRT1_2;
  double k0 = 1.0;
  LatitudeFrame frame;

  static LatitudeFamily from_k0(double k0, const LatitudeFrame& frame = {});
  // Frame completed from the axis w; v1 and v0 from tangent_basis.
  static LatitudeFamily from_axis(double k0, const Vec3& w);
  void validate() const;
};

double k_to_r(double k0);
PhaseState family_point(const LatitudeFamily& fam, double t);

// Coefficients of the reduced field along the kernel directions W2 (w tilts toward v1)
// and W3 (w tilts toward v0).
struct ReducedFieldValue {
  double a2 = 0.0;
  double a3 = 0.0;
};

inline constexpr int kReductionQuadrature = 256;

// First-order curvature perturbation that may also depend on the unit left normal
// N = x cross v / |v| of the curve. A metric perturbation enters this way.
using NormalPerturbation = std::function<double(const Vec3& x, const Vec3& normal)>;

// Fourier extraction from mu(t) = |alpha'| k1(alpha(t)) on a trapezoid grid.
ReducedFieldValue reduced_field(const CurvatureFunction& k1, const LatitudeFamily& fam,
                                int samples = kReductionQuadrature);
ReducedFieldValue reduced_field(const NormalPerturbation& k1, const LatitudeFamily& fam,
                                int samples = kReductionQuadrature);
// The same field as a tangent vector at the axis w: a2 v1 + a3 v0 (independent of the frame).
Vec3 reduced_field_at(const CurvatureFunction& k1, double k0, const Vec3& w, int samples = kReductionQuadrature);
Vec3 reduced_field_at(const NormalPerturbation& k1, double k0, const Vec3& w, int samples = kReductionQuadrature);

struct ReducedZero {
  Vec3 w;
  int local_degree = 0;        // sign det of the tangent Jacobian
  Eigen::Matrix2d jacobian;    // in the basis (v1, v0) of T_w S^2
  double condition = 0.0;
  bool degenerate = false;     // condition above 1e10
  int predicted_orbit_degree() const { return -local_degree; }
};

struct ReducedZeroOptions {
  int seeds = 64;
  double tol = 1e-13;
  double merge = 1e-6;
  int samples = kReductionQuadrature;
};

// Zeros of the reduced field on S^2 by multistart Newton. Throws a degenerate error if
// the field vanishes identically.
std::vector<ReducedZero> reduced_zeros(const CurvatureFunction& k1, double k0, const ReducedZeroOptions& opt = {});
std::vector<ReducedZero> reduced_zeros(const NormalPerturbation& k1, double k0, const ReducedZeroOptions& opt = {});

struct ReductionSeed {
  PhaseState state;         // family point at t = 0, period 1
  double period = 1.0;
  LatitudeFamily family;
  int predicted_degree = 0;
  double eps = 0.0;
  std::string perturbation;
};

// Shooting seed for k = k0 + eps k1 near the family member with axis w. Refuses degenerate zeros.
ReductionSeed seed_from_reduction(double k0, const CurvatureFunction& k1, double eps, const ReducedZero& zero);
ReductionSeed seed_from_zero(double k0, const ReducedZero& zero, double eps = 0.0, std::string perturbation = {});

// Distance of a closed curve from the family circle with axis w: max over samples of the
// Euclidean distance to the circle.
double distance_to_family(const LatitudeFamily& fam, const std::vector<Vec3>& points);

}  // namespace magorbit
