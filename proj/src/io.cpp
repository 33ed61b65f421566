#include "magorbit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "magorbit/errors.hpp"

namespace magorbit {

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string manifest_hash(const Json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const PhaseState& s) { return Json{{"x", to_json(s.x)}, {"v", to_json(s.v)}}; }

Json to_json(const Eigen::Matrix2d& A) {
  return Json::array({Json::array({A(0, 0), A(0, 1)}), Json::array({A(1, 0), A(1, 1)})});
}

Json to_json(const IndexResult& r) {
  return Json{{"index", r.index},
              {"method", to_string(r.method)},
              {"certificate", r.certificate},
              {"radius", r.radius},
              {"probes", r.probes}};
}

Json to_json(const ClosedOrbit& o) {
  Json j{{"initial", to_json(o.initial)},
         {"period", o.period},
         {"residual", o.residual},
         {"degree", o.degree ? Json(*o.degree) : Json(nullptr)},
         {"index", o.index ? to_json(*o.index) : Json(nullptr)},
         {"simple", o.simple},
         {"simple_inconclusive", o.simple_inconclusive},
         {"multiplicity", o.multiplicity},
         {"dP", to_json(o.dP)},
         {"provenance", o.provenance},
         {"iterations", o.iterations},
         {"condition", o.condition}};
  return j;
}

Json to_json(const HypothesisVerdict& v) {
  return Json{{"name", v.name},
              {"verdict", to_string(v.verdict)},
              {"slack", std::isfinite(v.slack) ? Json(v.slack) : Json(nullptr)},
              {"margin", v.margin},
              {"conservative", v.conservative},
              {"note", v.note}};
}

Json to_json(const AuditReport& r) {
  Json orbits = Json::array();
  Json lengths = Json::array();
  Json residuals = Json::array();
  for (const auto& a : r.orbits) {
    residuals.push_back(a.gb_residual);
    lengths.push_back(a.length.length);
    orbits.push_back(Json{{"gb_residual", a.gb_residual},
                          {"line_integral", a.gauss_bonnet.line_integral},
                          {"interior_curvature", a.gauss_bonnet.interior_curvature},
                          {"boundary_curvature", a.gauss_bonnet.boundary_curvature},
                          {"interior_area", a.gauss_bonnet.interior_area},
                          {"exterior_area", a.gauss_bonnet.exterior_area},
                          {"volume", a.gauss_bonnet.volume},
                          {"error_bound", a.gauss_bonnet.error_bound},
                          {"skipped_nodes", a.gauss_bonnet.skipped_nodes},
                          {"length", a.length.length},
                          {"length_upper", std::isfinite(a.length.upper) ? Json(a.length.upper) : Json(nullptr)},
                          {"length_slack", std::isfinite(a.length.slack) ? Json(a.length.slack) : Json(nullptr)},
                          {"length_holds", a.length.holds}});
  }
  const auto& e = r.extremes;
  const double upper = r.length_upper;
  return Json{
      {"gb_residuals", residuals},
      {"length_bounds",
       {{"lower", {{"measured_min_length", r.min_length}, {"note", "lower constant is not explicit; no pass/fail"}}},
        {"upper", std::isfinite(upper) ? Json(upper) : Json(nullptr)},
        {"measured", lengths}}},
      {"extremes",
       {{"inf_k", e.inf_k},
        {"sup_K", e.sup_K},
        {"inf_K", e.inf_K},
        {"sup_K_minus", e.sup_K_minus},
        {"vol", e.volume},
        {"inj_lower", e.inj_lower ? Json(*e.inj_lower) : Json(nullptr)},
        {"k_margin", e.k.margin},
        {"K_margin", e.K.margin},
        {"heuristic", e.heuristic}}},
      {"hypotheses", Json::array({to_json(r.hypotheses.injectivity), to_json(r.hypotheses.positive),
                                  to_json(r.hypotheses.pinched)})},
      {"degree_sum", r.degree_sum ? Json(*r.degree_sum) : Json(nullptr)},
      {"degree_note", r.degree_note},
      {"orbits", orbits}};
}

Vec3 vec3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(ErrorKind::config, where + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) fail(ErrorKind::config, where + ": entries must be numbers");
    v[i] = j[i].get<double>();
  }
  return v;
}

PhaseState state_from_json(const Json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("x") || !j.contains("v"))
    fail(ErrorKind::config, where + ": expected an object with keys 'x' and 'v'");
  const Vec3 x = vec3_from_json(j["x"], where + ".x");
  if (x.norm() == 0.0) fail(ErrorKind::config, where + ".x: zero vector");
  return make_state(x, vec3_from_json(j["v"], where + ".v"));
}

Json monodromy_json(const ConformalMetric& m, const CurvatureFunction& k, const Monodromy& M) {
  Json matrix = Json::array();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) matrix.push_back(M.matrix(i, j));
  Eigen::EigenSolver<Eigen::Matrix4d> es(M.matrix);
  Json eig = Json::array();
  for (int i = 0; i < 4; ++i) eig.push_back(Json::array({es.eigenvalues()[i].real(), es.eigenvalues()[i].imag()}));
  return Json{{"period", M.period},
              {"matrix", matrix},
              {"eigenvalues", eig},
              {"reduced_block", to_json(M.reduced_block(m, k))}};
}

Json reduction_report(double k0, const std::string& perturbation, const std::vector<ReducedZero>& zeros) {
  Json zs = Json::array();
  Json predicted = Json::array();
  for (const auto& z : zeros) {
    zs.push_back(Json{{"w", to_json(z.w)},
                      {"local_degree", z.local_degree},
                      {"jacobian", to_json(z.jacobian)},
                      {"condition", z.condition},
                      {"degenerate", z.degenerate}});
    predicted.push_back(z.degenerate ? Json(nullptr) : Json(z.predicted_orbit_degree()));
  }
  return Json{{"k0", k0},
              {"r", k_to_r(k0)},
              {"perturbation", perturbation},
              {"zeros", zs},
              {"predicted_orbit_degrees", predicted}};
}

Json orbit_catalog(const std::vector<ClosedOrbit>& orbits) {
  Json list = Json::array();
  for (const auto& o : orbits) list.push_back(to_json(o));
  return list;
}

std::vector<CatalogEntry> read_catalog(const Json& catalog) {
  const Json& list = catalog.is_object() && catalog.contains("orbits") ? catalog["orbits"] : catalog;
  if (!list.is_array()) fail(ErrorKind::config, "catalog: expected an array of orbits or an object with key 'orbits'");
  std::vector<CatalogEntry> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string where = "catalog.orbits[" + std::to_string(i) + "]";
    const Json& o = list[i];
    if (!o.is_object()) fail(ErrorKind::config, where + ": expected an object");
    if (!o.contains("initial")) fail(ErrorKind::config, where + ": missing key 'initial'");
    if (!o.contains("period") || !o["period"].is_number())
      fail(ErrorKind::config, where + ": missing numeric key 'period'");
    CatalogEntry e;
    e.initial = state_from_json(o["initial"], where + ".initial");
    e.period = o["period"].get<double>();
    if (!(e.period > 0.0)) fail(ErrorKind::config, where + ".period: must be positive");
    if (o.contains("provenance") && o["provenance"].is_string()) e.provenance = o["provenance"];
    out.push_back(e);
  }
  return out;
}

namespace {

void hash_line(std::ostream& os, const std::string& hash) {
  if (!hash.empty()) os << "# manifest " << hash << '\n';
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const ConformalMetric& m, const Trajectory& traj,
                          const std::vector<double>& times, const std::string& hash) {
  hash_line(os, hash);
  os << "t,x1,x2,x3,v1,v2,v3,speed_g\n";
  for (double t : times) {
    const PhaseState s = traj.at(t);
    os << format_double(t);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(s.x[i]);
    for (int i = 0; i < 3; ++i) os << ',' << format_double(s.v[i]);
    os << ',' << format_double(g_speed(m, s)) << '\n';
  }
}

void write_continuation_csv(std::ostream& os, const ContinuationLog& log, const std::string& hash) {
  hash_line(os, hash);
  os << "t,branch,residual,degree,period,stage,note\n";
  for (const auto& r : log.records) {
    os << format_double(r.t) << ',' << r.branch << ',' << format_double(r.residual) << ','
       << (r.degree ? std::to_string(*r.degree) : std::string()) << ',' << format_double(r.period) << ',' << r.stage
       << ',' << r.note << '\n';
  }
}

std::vector<Vec3> read_loop_csv(std::istream& is) {
  std::vector<Vec3> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ls, cell, ',')) {
      double v = 0.0;
      const char* b = cell.data();
      while (*b == ' ') ++b;
      const auto r = std::from_chars(b, cell.data() + cell.size(), v);
      if (r.ec != std::errc()) {
        if (pts.empty() && vals.empty()) break;  // header row
        fail(ErrorKind::config, "loop csv line " + std::to_string(lineno) + ": '" + cell + "' is not a number");
      }
      vals.push_back(v);
    }
    if (vals.empty()) continue;
    if (vals.size() != 3)
      fail(ErrorKind::config, "loop csv line " + std::to_string(lineno) + ": expected 3 columns, got " +
                                  std::to_string(vals.size()));
    pts.emplace_back(vals[0], vals[1], vals[2]);
  }
  if (pts.size() >= 2 && (pts.front() - pts.back()).norm() == 0.0)
    fail(ErrorKind::config, "loop csv: first row repeated at the end (loops are closed implicitly)");
  return pts;
}

void write_loop_csv(std::ostream& os, const std::vector<Vec3>& points, const std::string& hash) {
  hash_line(os, hash);
  os << "x1,x2,x3\n";
  for (const auto& p : points)
    os << format_double(p.x()) << ',' << format_double(p.y()) << ',' << format_double(p.z()) << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::config, path + ": " + e.what());
  }
}

}  // namespace magorbit
