#include "magorbit/sphere_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "magorbit/errors.hpp"

namespace magorbit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::config: return "configuration error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::unsupported: return "unsupported operation";
    case ErrorKind::integration: return "integration failure";
    case ErrorKind::no_convergence: return "no convergence";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::no_return: return "no return";
    case ErrorKind::uncertified: return "uncertified index";
    case ErrorKind::invariant: return "invariant violation";
    case ErrorKind::resolution: return "resolution too low";
  }
  return "error";
}

SurfacePoint::SurfacePoint(const Vec3& x) {
  const double n = x.norm();
  require(n > 0.0 && std::isfinite(n), "SurfacePoint: zero or non-finite vector");
  x_ = x / n;
}

TangentVector::TangentVector(const SurfacePoint& base, const Vec3& v)
    : base_(base), v_(tangent_part(base.x(), v)) {}

ConformalMetric::ConformalMetric(std::string id, ScalarField u, VectorField grad0_u, ScalarField lap0_u,
                                 Json spec, bool round)
    : id_(std::move(id)),
      u_(std::move(u)),
      grad_(std::move(grad0_u)),
      lap_(std::move(lap0_u)),
      spec_(std::move(spec)),
      round_(round) {}

double ConformalMetric::factor(const Vec3& x) const { return std::exp(2.0 * u_(x)); }

ConformalMetric ConformalMetric::round() {
  return ConformalMetric(
      "round", [](const Vec3&) { return 0.0; }, [](const Vec3&) { return Vec3::Zero().eval(); },
      [](const Vec3&) { return 0.0; }, Json{{"kind", "round"}}, true);
}

ConformalMetric ConformalMetric::constant(double c) {
  std::ostringstream id;
  id << "constant(" << c << ")";
  return ConformalMetric(
      id.str(), [c](const Vec3&) { return c; }, [](const Vec3&) { return Vec3::Zero().eval(); },
      [](const Vec3&) { return 0.0; },
      Json{{"kind", "conformal_harmonic"}, {"terms", Json::array({Json{{"l", 0}, {"m", 0}, {"coeff", c}}})}},
      c == 0.0);
}

ConformalMetric ConformalMetric::zonal(const std::vector<double>& coeffs) {
  // f(z) = sum c_n z^n; grad0 u = f'(z)(e3 - z x); lap0 u = (1-z^2) f'' - 2 z f'.
  auto eval = [coeffs](double z, double& f, double& df, double& ddf) {
    f = df = ddf = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) {
      const double n = static_cast<double>(i + 1);
      const double c = coeffs[i];
      f += c * std::pow(z, n);
      df += c * n * std::pow(z, n - 1.0);
      if (i >= 1) ddf += c * n * (n - 1.0) * std::pow(z, n - 2.0);
    }
  };
  std::ostringstream id;
  id << "conformal_zonal[";
  for (std::size_t i = 0; i < coeffs.size(); ++i) id << (i ? "," : "") << coeffs[i];
  id << "]";
  bool all_zero = std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return c == 0.0; });
  return ConformalMetric(
      id.str(),
      [eval](const Vec3& x) {
        double f, df, ddf;
        eval(x.z(), f, df, ddf);
        return f;
      },
      [eval](const Vec3& x) {
        double f, df, ddf;
        eval(x.z(), f, df, ddf);
        return Vec3(df * (kE3 - x.z() * x));
      },
      [eval](const Vec3& x) {
        double f, df, ddf;
        const double z = x.z();
        eval(z, f, df, ddf);
        return (1.0 - z * z) * ddf - 2.0 * z * df;
      },
      Json{{"kind", "conformal_zonal"}, {"coeffs", coeffs}}, all_zero);
}

double solid_harmonic(int l, int m, const Vec3& p, Vec3* g) {
  const double x = p.x(), y = p.y(), z = p.z();
  double v = 0.0;
  Vec3 d = Vec3::Zero();
  if (l < 0 || l > 3 || m < -l || m > l)
    fail(ErrorKind::config, "conformal_harmonic: unsupported (l, m) = (" + std::to_string(l) + ", " +
                                std::to_string(m) + "); need 0 <= l <= 3, |m| <= l");
  const int key = l * 10 + m;
  switch (key) {
    case 0: v = 1.0; break;
    case 10 - 1: v = y; d = {0, 1, 0}; break;
    case 10: v = z; d = {0, 0, 1}; break;
    case 11: v = x; d = {1, 0, 0}; break;
    case 20 - 2: v = x * y; d = {y, x, 0}; break;
    case 20 - 1: v = y * z; d = {0, z, y}; break;
    case 20: v = 2 * z * z - x * x - y * y; d = {-2 * x, -2 * y, 4 * z}; break;
    case 21: v = x * z; d = {z, 0, x}; break;
    case 22: v = x * x - y * y; d = {2 * x, -2 * y, 0}; break;
    case 30 - 3: v = 3 * x * x * y - y * y * y; d = {6 * x * y, 3 * x * x - 3 * y * y, 0}; break;
    case 30 - 2: v = x * y * z; d = {y * z, x * z, x * y}; break;
    case 30 - 1:
      v = y * (4 * z * z - x * x - y * y);
      d = {-2 * x * y, 4 * z * z - x * x - 3 * y * y, 8 * y * z};
      break;
    case 30:
      v = z * (2 * z * z - 3 * x * x - 3 * y * y);
      d = {-6 * x * z, -6 * y * z, 6 * z * z - 3 * x * x - 3 * y * y};
      break;
    case 31:
      v = x * (4 * z * z - x * x - y * y);
      d = {4 * z * z - 3 * x * x - y * y, -2 * x * y, 8 * x * z};
      break;
    case 32: v = z * (x * x - y * y); d = {2 * x * z, -2 * y * z, x * x - y * y}; break;
    case 33: v = x * x * x - 3 * x * y * y; d = {3 * x * x - 3 * y * y, -6 * x * y, 0}; break;
    default: break;
  }
  if (g) *g = d;
  return v;
}

ConformalMetric ConformalMetric::harmonic(const std::vector<HarmonicTerm>& terms) {
  for (const auto& t : terms) solid_harmonic(t.l, t.m, kE3);  // validates (l, m)
  std::ostringstream id;
  id << "conformal_harmonic[";
  Json jterms = Json::array();
  bool all_zero = true;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    id << (i ? "," : "") << terms[i].l << ":" << terms[i].m << ":" << terms[i].coeff;
    jterms.push_back(Json{{"l", terms[i].l}, {"m", terms[i].m}, {"coeff", terms[i].coeff}});
    all_zero = all_zero && terms[i].coeff == 0.0;
  }
  id << "]";
  // On the sphere a degree-l solid harmonic P satisfies lap0 P = -l(l+1) P and
  // grad0 P = grad P - l P x (Euler's identity for the radial part).
  return ConformalMetric(
      id.str(),
      [terms](const Vec3& x) {
        double s = 0.0;
        for (const auto& t : terms) s += t.coeff * solid_harmonic(t.l, t.m, x);
        return s;
      },
      [terms](const Vec3& x) {
        Vec3 s = Vec3::Zero();
        for (const auto& t : terms) {
          Vec3 g;
          const double p = solid_harmonic(t.l, t.m, x, &g);
          s += t.coeff * (g - t.l * p * x);
        }
        return s;
      },
      [terms](const Vec3& x) {
        double s = 0.0;
        for (const auto& t : terms) s -= t.coeff * t.l * (t.l + 1) * solid_harmonic(t.l, t.m, x);
        return s;
      },
      Json{{"kind", "conformal_harmonic"}, {"terms", jterms}}, all_zero);
}

ConformalMetric ConformalMetric::from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "metric: expected a JSON object");
  if (!j.contains("kind")) fail(ErrorKind::config, "metric: missing key 'kind'");
  if (!j["kind"].is_string()) fail(ErrorKind::config, "metric: key 'kind' must be a string");
  const std::string kind = j["kind"];
  const std::map<std::string, std::set<std::string>> allowed{
      {"round", {}}, {"conformal_zonal", {"coeffs"}}, {"conformal_harmonic", {"terms"}}};
  if (const auto it = allowed.find(kind); it != allowed.end()) {
    for (const auto& [key, value] : j.items())
      if (key != "kind" && !it->second.count(key))
        fail(ErrorKind::config, "metric: unknown key '" + key + "' for kind '" + kind + "'");
  }
  if (kind == "round") return round();
  if (kind == "conformal_zonal") {
    if (!j.contains("coeffs") || !j["coeffs"].is_array())
      fail(ErrorKind::config, "metric: 'conformal_zonal' requires array key 'coeffs'");
    std::vector<double> c;
    for (const auto& v : j["coeffs"]) {
      if (!v.is_number()) fail(ErrorKind::config, "metric: 'coeffs' entries must be numbers");
      c.push_back(v.get<double>());
    }
    return zonal(c);
  }
  if (kind == "conformal_harmonic") {
    if (!j.contains("terms") || !j["terms"].is_array())
      fail(ErrorKind::config, "metric: 'conformal_harmonic' requires array key 'terms'");
    std::vector<HarmonicTerm> terms;
    for (const auto& t : j["terms"]) {
      for (const char* key : {"l", "m", "coeff"})
        if (!t.contains(key) || !t[key].is_number())
          fail(ErrorKind::config, std::string("metric: harmonic term missing numeric key '") + key + "'");
      terms.push_back({t["l"].get<int>(), t["m"].get<int>(), t["coeff"].get<double>()});
    }
    return harmonic(terms);
  }
  fail(ErrorKind::config, "metric: unknown 'kind' value '" + kind + "'");
}

double inner(const ConformalMetric& m, const Vec3& x, const Vec3& a, const Vec3& b) {
  return m.factor(x) * a.dot(b);
}

double gauss_curvature(const ConformalMetric& m, const Vec3& x) {
  return std::exp(-2.0 * m.u(x)) * (1.0 - m.lap0_u(x));
}

Vec3 connection(const ConformalMetric& m, const Vec3& x, const Vec3& a, const Vec3& b) {
  const Vec3 gu = m.grad0_u(x);
  const double ab = a.dot(b);
  return ab * x + gu.dot(a) * b + gu.dot(b) * a - ab * gu;
}

Vec3 covariant_accel(const ConformalMetric& m, const Vec3& x, const Vec3& velocity, const Vec3& accel) {
  return tangent_part(x, accel + connection(m, x, velocity, velocity));
}

static void same_base(const SurfacePoint& at, const TangentVector& a) {
  require((at.x() - a.base().x()).norm() <= 1e-12, "tangent vector based at a different point");
}

double metric_inner(const ConformalMetric& m, const SurfacePoint& at, const TangentVector& a,
                    const TangentVector& b) {
  same_base(at, a);
  same_base(at, b);
  return inner(m, at.x(), a.v(), b.v());
}

TangentVector rotate(const ConformalMetric&, const SurfacePoint& at, const TangentVector& a) {
  same_base(at, a);
  return TangentVector(at, at.x().cross(a.v()));
}

double gauss_curvature(const ConformalMetric& m, const SurfacePoint& at) { return gauss_curvature(m, at.x()); }

TangentVector covariant_accel(const ConformalMetric& m, const SurfacePoint& at, const Vec3& velocity,
                              const Vec3& accel) {
  require(std::abs(at.x().dot(velocity)) <= 1e-10 * std::max(1.0, velocity.norm()),
          "covariant_accel: velocity not tangent");
  return TangentVector(at, covariant_accel(m, at.x(), velocity, accel));
}

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double num = std::abs(a.dot(b.cross(c)));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

Quadrature icosahedral_quadrature(int level) {
  require(level >= 0, "quadrature level must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Eigen::Vector3i> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                    {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                    {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                    {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<Eigen::Vector3i> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = tri[0], b = tri[1], c = tri[2];
      const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
      next.emplace_back(a, ab, ca);
      next.emplace_back(b, bc, ab);
      next.emplace_back(c, ca, bc);
      next.emplace_back(ab, bc, ca);
    }
    f.swap(next);
  }
  Quadrature q;
  q.level = level;
  q.vertices = v;
  q.triangles = f;
  q.nodes.reserve(f.size());
  q.weights.reserve(f.size());
  for (const auto& tri : f) {
    const Vec3& a = v[tri[0]];
    const Vec3& b = v[tri[1]];
    const Vec3& c = v[tri[2]];
    q.nodes.push_back((a + b + c).normalized());
    q.weights.push_back(spherical_triangle_area(a, b, c));
  }
  return q;
}

Quadrature quadrature(const ConformalMetric&, int level) {
  require(level >= 1, "quadrature level must be >= 1");
  return icosahedral_quadrature(level);
}

double volume(const ConformalMetric& m, const Quadrature& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * m.factor(q.nodes[i]);
  return s;
}

void tangent_basis(const Vec3& x, Vec3& e1, Vec3& e2) {
  const Vec3 ref = std::abs(x.x()) < 0.6 ? kE1 : (std::abs(x.y()) < 0.6 ? kE2 : kE3);
  e1 = tangent_part(x, ref).normalized();
  e2 = x.cross(e1);
}

namespace {

// Compass search in the tangent plane, starting at spacing h; sign = +1 minimizes.
Vec3 refine_extremum(const std::function<double(const Vec3&)>& f, Vec3 x, double h, double sign, double& best) {
  best = sign * f(x);
  for (int it = 0; it < 200 && h > 1e-9; ++it) {
    Vec3 e1, e2;
    tangent_basis(x, e1, e2);
    bool improved = false;
    for (const Vec3& d : {e1, Vec3(-e1), e2, Vec3(-e2)}) {
      const Vec3 y = (x + h * d).normalized();
      const double fy = sign * f(y);
      if (fy < best) {
        best = fy;
        x = y;
        improved = true;
        break;
      }
    }
    if (!improved) h *= 0.5;
  }
  best *= sign;
  return x;
}

}  // namespace

Extremes field_extremes(const std::function<double(const Vec3&)>& f, int level,
                        std::optional<double> lipschitz) {
  require(level >= 1, "field_extremes: level must be >= 1");
  const Quadrature q = icosahedral_quadrature(level);
  std::vector<double> val(q.vertices.size());
  std::size_t imin = 0, imax = 0;
  for (std::size_t i = 0; i < q.vertices.size(); ++i) {
    val[i] = f(q.vertices[i]);
    if (val[i] < val[imin]) imin = i;
    if (val[i] > val[imax]) imax = i;
  }
  // Edge statistics: spacing and an empirical Lipschitz constant.
  double max_edge = 0.0, lip_est = 0.0;
  for (const auto& tri : q.triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      const double d = (q.vertices[a] - q.vertices[b]).norm();
      max_edge = std::max(max_edge, d);
      if (d > 0) lip_est = std::max(lip_est, std::abs(val[a] - val[b]) / d);
    }
  }
  // Any point lies within max_edge/sqrt(3) of a vertex (circumradius bound).
  const double covering = max_edge / std::sqrt(3.0);
  Extremes e;
  double lo, hi;
  e.argmin = refine_extremum(f, q.vertices[imin], 0.5 * max_edge, +1.0, lo);
  e.argmax = refine_extremum(f, q.vertices[imax], 0.5 * max_edge, -1.0, hi);
  e.inf = std::min(lo, val[imin]);
  e.sup = std::max(hi, val[imax]);
  if (lipschitz) {
    e.margin = *lipschitz * covering;
    e.heuristic = false;
  } else {
    e.margin = lip_est * covering;
    e.heuristic = true;
  }
  return e;
}

}  // namespace magorbit
