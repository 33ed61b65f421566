#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "magorbit/apriori_audit.hpp"
#include "magorbit/closed_orbits.hpp"
#include "magorbit/magnetic_flow.hpp"
#include "magorbit/poincare.hpp"
#include "magorbit/reduction.hpp"
#include "magorbit/sphere_geometry.hpp"
#include "magorbit/variational.hpp"

namespace magorbit {

// FNV-1a 64 over the canonical (sorted-key, compact) dump of a config.
std::uint64_t fnv1a64(const std::string& bytes);
std::string manifest_hash(const Json& config);

// Shortest round-trip decimal form; output files use it so reruns are byte-identical.
std::string format_double(double v);

Json to_json(const Vec3& v);
Json to_json(const PhaseState& s);
Json to_json(const Eigen::Matrix2d& A);  // row-major nested arrays
Json to_json(const IndexResult& r);
Json to_json(const ClosedOrbit& o);
Json to_json(const HypothesisVerdict& v);
Json to_json(const AuditReport& r);

Vec3 vec3_from_json(const Json& j, const std::string& where);
PhaseState state_from_json(const Json& j, const std::string& where);

// {period, matrix (row-major 4x4), eigenvalues [[re, im]...], reduced_block}
Json monodromy_json(const ConformalMetric& m, const CurvatureFunction& k, const Monodromy& M);
Json reduction_report(double k0, const std::string& perturbation, const std::vector<ReducedZero>& zeros);
Json orbit_catalog(const std::vector<ClosedOrbit>& orbits);

struct CatalogEntry {
  PhaseState initial;
  double period = 0.0;
  std::string provenance;
};
std::vector<CatalogEntry> read_catalog(const Json& catalog);

// Columns t, x1, x2, x3, v1, v2, v3, speed_g.
void write_trajectory_csv(std::ostream& os, const ConformalMetric& m, const Trajectory& traj,
                          const std::vector<double>& times, const std::string& hash = {});
// Columns t, branch, residual, degree, period, stage, note; degree is empty when undetermined.
void write_continuation_csv(std::ostream& os, const ContinuationLog& log, const std::string& hash = {});

// n x 3 points, closed, first row not repeated. Lines starting with '#' are comments.
std::vector<Vec3> read_loop_csv(std::istream& is);
void write_loop_csv(std::ostream& os, const std::vector<Vec3>& points, const std::string& hash = {});

// Reads a whole file; a config error names the path when it cannot be opened.
std::string read_file(const std::string& path);
// JSON from a file; parse errors carry the file name and the parser's line/column.
Json read_json_file(const std::string& path);

}  // namespace magorbit
