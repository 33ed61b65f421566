#pragma once

#include <optional>
#include <string>
#include <vector>

#include "magorbit/closed_orbits.hpp"
#include "magorbit/curvature.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/reduction.hpp"
#include "magorbit/sphere_geometry.hpp"

namespace magorbit {

// ---------------------------------------------------------------------------
// Gauss-Bonnet on a closed orbit

enum class InteriorMethod {
  quadrature,  // classify quadrature nodes by winding number
  boundary,    // Stokes: round cap area and the flux of grad u through the curve
};

struct GaussBonnetOptions {
  InteriorMethod method = InteriorMethod::quadrature;
  int level = 4;           // base icosahedral level
  int refine_depth = 6;    // extra subdivisions of cells cut by the curve
  int curve_samples = 4096;
  double skip_distance = 1e-6;
  bool reverse = false;    // audit the reversed traversal (complementary region, curvature -k)
};

struct GaussBonnetResult {
  double line_integral = 0.0;      // integral of k ds_g along the traversal
  double interior_curvature = 0.0; // integral of K dA_g over the left region (selected method)
  double quadrature_curvature = 0.0;
  double boundary_curvature = 0.0;
  double residual = 0.0;           // |line + interior - 2 pi|
  double interior_area = 0.0;      // g-area of the left region (quadrature)
  double exterior_area = 0.0;
  double volume = 0.0;             // g-area of the sphere at the base level
  double error_bound = 0.0;        // quadrature bound from cut and skipped cells
  int skipped_nodes = 0;
  int winding = 0;                 // about the boundary-method axis, +-1
};

// Winding number of a closed polyline about p in the stereographic chart from -p. It counts
// [p on the left] - [-p on the left], so it is not an interior test on its own.
int spherical_winding(const std::vector<Vec3>& loop, const Vec3& p);

GaussBonnetResult gauss_bonnet(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& orbit,
                               double period, const GaussBonnetOptions& opt = {});
double gauss_bonnet_residual(const ConformalMetric& m, const CurvatureFunction& k, const ClosedOrbit& orbit,
                             const GaussBonnetOptions& opt = {});

// ---------------------------------------------------------------------------
// Extremes and the length bound

struct AuditExtremes {
  Extremes k;
  Extremes K;
  double inf_k = 0.0;
  double sup_K = 0.0;
  double inf_K = 0.0;
  double sup_K_minus = 0.0;  // max(0, -inf K)
  double volume = 0.0;
  std::optional<double> inj_lower;  // pi / sqrt(sup K) when K > 0 everywhere
  bool heuristic = true;
};

AuditExtremes audit_extremes(const ConformalMetric& m, const CurvatureFunction& k, int level = kDefaultQuadratureLevel);

double g_length(const ConformalMetric& m, const Trajectory& orbit, double period, int samples = 2048);

struct LengthBound {
  double length = 0.0;
  double upper = 0.0;  // (inf k - margin)^{-1} (2 pi + (sup K^- + margin) vol)
  double slack = 0.0;  // upper - length
  bool holds = false;
};

// (inf k - margin)^{-1} (2 pi + (sup K^- + margin) vol); infinite when inf k is not positive.
double length_upper_bound(const AuditExtremes& ex);
LengthBound length_bound_check(const ConformalMetric& m, const CurvatureFunction& k, const ClosedOrbit& orbit,
                               const AuditExtremes& ex);

// ---------------------------------------------------------------------------
// Hypotheses of the existence theorem

enum class Verdict { satisfied, failed, indeterminate };
const char* to_string(Verdict v);

struct HypothesisVerdict {
  std::string name;
  Verdict verdict = Verdict::indeterminate;
  double slack = 0.0;
  double margin = 0.0;
  bool conservative = false;  // uses a lower bound in place of the true quantity
  std::string note;
};

struct HypothesisReport {
  HypothesisVerdict injectivity;  // 4 inf k >= inj^{-1} (2 pi + sup K^- vol)
  HypothesisVerdict positive;     // K > 0 and 2 inf k >= sqrt(sup K)
  HypothesisVerdict pinched;      // sup K < 4 inf K
  bool any_satisfied() const;
};

HypothesisReport hypothesis_check(const AuditExtremes& ex, std::optional<double> inj = std::nullopt);
HypothesisReport hypothesis_check(const ConformalMetric& m, const CurvatureFunction& k,
                                  std::optional<double> inj = std::nullopt);

// ---------------------------------------------------------------------------
// Full audit

struct OrbitAudit {
  double gb_residual = 0.0;
  GaussBonnetResult gauss_bonnet;
  LengthBound length;
};

struct AuditReport {
  std::vector<OrbitAudit> orbits;
  AuditExtremes extremes;
  HypothesisReport hypotheses;
  double min_length = 0.0;  // measured; the lower constant has no explicit value
  double length_upper = 0.0;
  std::optional<int> degree_sum;
  std::string degree_note;  // why degree_sum is missing
};

AuditReport audit(const ConformalMetric& m, const CurvatureFunction& k, const std::vector<ClosedOrbit>& orbits,
                  std::optional<double> inj = std::nullopt, const GaussBonnetOptions& gb = {});

// ---------------------------------------------------------------------------
// Homotopy continuation: metric e^{2u_t} = (1 - t) + t e^{2u} at k = k0, then
// k_t = (1 - t) k0 + t k on the target metric.

// The metric with e^{2u_t} = (1 - t) + t e^{2u}.
ConformalMetric interpolated_metric(const ConformalMetric& target, double t);
// First-order curvature perturbation equivalent to moving the round metric toward the target:
// k0 u1 + <grad0 u1, N>, with u1 = (e^{2u} - 1) / 2.
NormalPerturbation metric_perturbation(const ConformalMetric& target, double k0);

struct ContinuationOptions {
  int steps = 10;  // initial dt = 1 / steps
  int max_halvings = 4;
  int max_corrector = 12;
  ShootOptions shoot;
  // Probe-circle index when det(dP - I) is below the certification floor. Symmetric
  // problems pass through such points without a degree change.
  bool index_fallback = true;
  bool check_hypotheses = true;
};

struct ContinuationRecord {
  int stage = 1;  // 1: metric, 2: curvature
  double t = 0.0;
  int branch = 0;
  double residual = 0.0;
  std::optional<int> degree;
  double period = 0.0;
  Eigen::Matrix2d dP = Eigen::Matrix2d::Identity();
  PhaseState state;
  std::string note;  // "reduced", "step", "fold", "terminated", "identity"
};

struct ContinuationLog {
  std::vector<ContinuationRecord> records;
  std::vector<ClosedOrbit> final_orbits;  // census at t = 1 of stage 2
  std::optional<int> final_degree_sum;
  int terminated = 0;
  std::vector<std::string> warnings;
  // Degree sum over the live branches at each recorded (stage, t).
  std::vector<std::pair<double, int>> degree_sums() const;
};

ContinuationLog homotopy_continuation(const ConformalMetric& u_target, const CurvatureFunction& k_target, double k0,
                                      const ContinuationOptions& opt = {});

}  // namespace magorbit
