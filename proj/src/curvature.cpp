#include "magorbit/curvature.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "magorbit/errors.hpp"

namespace magorbit {

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

}  // namespace

CurvatureFunction::CurvatureFunction(std::string id, Value k, Gradient grad, Json spec)
    : id_(std::move(id)), k_(std::move(k)), grad_(std::move(grad)), spec_(std::move(spec)) {}

Vec3 CurvatureFunction::gradient(const Vec3& x) const {
  if (!grad_) fail(ErrorKind::unsupported, "curvature function '" + id_ + "' has no gradient evaluator");
  return grad_(x);
}

CurvatureFunction CurvatureFunction::constant(double c) {
  CurvatureFunction f(
      "constant(" + fmt_double(c) + ")", [c](const Vec3&) { return c; },
      [](const Vec3&) { return Vec3::Zero().eval(); }, Json{{"kind", "constant"}, {"value", c}});
  f.constant_ = c;
  return f;
}

CurvatureFunction CurvatureFunction::zonal(const std::vector<double>& coeffs) {
  std::ostringstream id;
  id << "zonal[";
  for (std::size_t i = 0; i < coeffs.size(); ++i) id << (i ? "," : "") << fmt_double(coeffs[i]);
  id << "]";
  CurvatureFunction f(
      id.str(),
      [coeffs](const Vec3& x) {
        double s = 0.0;
        for (std::size_t i = coeffs.size(); i-- > 0;) s = s * x.z() + coeffs[i];
        return s;
      },
      [coeffs](const Vec3& x) {
        double d = 0.0;
        for (std::size_t i = coeffs.size(); i-- > 1;) d = d * x.z() + static_cast<double>(i) * coeffs[i];
        return Vec3(d * kE3);
      },
      Json{{"kind", "zonal"}, {"coeffs", coeffs}});
  bool higher_zero = true;
  for (std::size_t i = 1; i < coeffs.size(); ++i) higher_zero = higher_zero && coeffs[i] == 0.0;
  if (higher_zero) f.constant_ = coeffs.empty() ? 0.0 : coeffs[0];
  return f;
}

CurvatureFunction CurvatureFunction::linear(double c0, const Vec3& a) {
  std::ostringstream id;
  id << "linear(" << fmt_double(c0) << ";" << fmt_double(a.x()) << "," << fmt_double(a.y()) << ","
     << fmt_double(a.z()) << ")";
  CurvatureFunction f(
      id.str(), [c0, a](const Vec3& x) { return c0 + a.dot(x); }, [a](const Vec3&) { return a; },
      Json{{"kind", "linear"}, {"c0", c0}, {"a", {a.x(), a.y(), a.z()}}});
  if (a.isZero(0.0)) f.constant_ = c0;
  return f;
}

CurvatureFunction CurvatureFunction::polynomial(const std::vector<Monomial>& terms) {
  std::ostringstream id;
  id << "polynomial[";
  Json jt = Json::array();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    for (int p : t.powers) require(p >= 0, "polynomial: negative power");
    id << (i ? "+" : "") << fmt_double(t.coeff) << "x^" << t.powers[0] << "y^" << t.powers[1] << "z^"
       << t.powers[2];
    jt.push_back(Json{{"coeff", t.coeff}, {"powers", t.powers}});
  }
  id << "]";
  return CurvatureFunction(
      id.str(),
      [terms](const Vec3& x) {
        double s = 0.0;
        for (const auto& t : terms)
          s += t.coeff * ipow(x.x(), t.powers[0]) * ipow(x.y(), t.powers[1]) * ipow(x.z(), t.powers[2]);
        return s;
      },
      [terms](const Vec3& x) {
        Vec3 g = Vec3::Zero();
        for (const auto& t : terms) {
          const auto& p = t.powers;
          const double px = ipow(x.x(), p[0]), py = ipow(x.y(), p[1]), pz = ipow(x.z(), p[2]);
          if (p[0] > 0) g.x() += t.coeff * p[0] * ipow(x.x(), p[0] - 1) * py * pz;
          if (p[1] > 0) g.y() += t.coeff * p[1] * px * ipow(x.y(), p[1] - 1) * pz;
          if (p[2] > 0) g.z() += t.coeff * p[2] * px * py * ipow(x.z(), p[2] - 1);
        }
        return g;
      },
      Json{{"kind", "polynomial"}, {"terms", jt}});
}

CurvatureFunction CurvatureFunction::height() {
  CurvatureFunction f = linear(0.0, kE3);
  f.id_ = "height";
  return f;
}

CurvatureFunction CurvatureFunction::combine(double a, const CurvatureFunction& f, double b,
                                             const CurvatureFunction& g) {
  Gradient grad;
  if (f.has_gradient() && g.has_gradient())
    grad = [a, b, f, g](const Vec3& x) { return Vec3(a * f.gradient(x) + b * g.gradient(x)); };
  CurvatureFunction out(
      fmt_double(a) + "*" + f.id() + "+" + fmt_double(b) + "*" + g.id(),
      [a, b, f, g](const Vec3& x) { return a * f(x) + b * g(x); }, grad,
      Json{{"kind", "combination"}, {"a", a}, {"f", f.spec()}, {"b", b}, {"g", g.spec()}});
  if (f.constant_ && g.constant_) out.constant_ = a * *f.constant_ + b * *g.constant_;
  if (f.constant_ && b == 0.0) out.constant_ = a * *f.constant_;
  if (g.constant_ && a == 0.0) out.constant_ = b * *g.constant_;
  return out;
}

CurvatureFunction CurvatureFunction::from_json(const Json& j) {
  if (j.is_number()) return constant(j.get<double>());
  if (!j.is_object()) fail(ErrorKind::config, "curvature: expected a number or a JSON object");
  if (!j.contains("kind") || !j["kind"].is_string())
    fail(ErrorKind::config, "curvature: missing string key 'kind'");
  const std::string kind = j["kind"];
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number())
      fail(ErrorKind::config, std::string("curvature: '") + kind + "' requires numeric key '" + key + "'");
    return j[key].get<double>();
  };
  auto numbers = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_array())
      fail(ErrorKind::config, std::string("curvature: '") + kind + "' requires array key '" + key + "'");
    std::vector<double> out;
    for (const auto& v : j[key]) {
      if (!v.is_number()) fail(ErrorKind::config, std::string("curvature: '") + key + "' entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  };
  const std::map<std::string, std::set<std::string>> allowed{{"constant", {"value"}},
                                                              {"zonal", {"coeffs"}},
                                                              {"linear", {"c0", "a"}},
                                                              {"polynomial", {"terms"}},
                                                              {"combination", {"a", "f", "b", "g"}}};
  if (const auto it = allowed.find(kind); it != allowed.end()) {
    for (const auto& [key, value] : j.items())
      if (key != "kind" && !it->second.count(key))
        fail(ErrorKind::config, "curvature: unknown key '" + key + "' for kind '" + kind + "'");
  }
  if (kind == "constant") return constant(number("value"));
  if (kind == "zonal") return zonal(numbers("coeffs"));
  if (kind == "linear") {
    const auto a = numbers("a");
    if (a.size() != 3) fail(ErrorKind::config, "curvature: 'linear' key 'a' needs 3 entries");
    return linear(number("c0"), Vec3(a[0], a[1], a[2]));
  }
  if (kind == "polynomial") {
    if (!j.contains("terms") || !j["terms"].is_array())
      fail(ErrorKind::config, "curvature: 'polynomial' requires array key 'terms'");
    std::vector<Monomial> terms;
    for (const auto& t : j["terms"]) {
      if (!t.contains("coeff") || !t["coeff"].is_number())
        fail(ErrorKind::config, "curvature: polynomial term missing numeric key 'coeff'");
      if (!t.contains("powers") || !t["powers"].is_array() || t["powers"].size() != 3)
        fail(ErrorKind::config, "curvature: polynomial term needs 'powers' [i,j,k]");
      terms.push_back({t["coeff"].get<double>(),
                       {t["powers"][0].get<int>(), t["powers"][1].get<int>(), t["powers"][2].get<int>()}});
    }
    return polynomial(terms);
  }
  if (kind == "combination") {
    if (!j.contains("f") || !j.contains("g")) fail(ErrorKind::config, "curvature: 'combination' needs 'f' and 'g'");
    return combine(number("a"), from_json(j["f"]), number("b"), from_json(j["g"]));
  }
  fail(ErrorKind::config, "curvature: unknown 'kind' value '" + kind + "'");
}

void check_positive(const CurvatureFunction& k) {
  const auto q = icosahedral_quadrature(3);
  for (const auto& x : q.vertices) {
    if (!(k(x) > 0.0)) {
      std::ostringstream os;
      os << "curvature '" << k.id() << "' is not positive at (" << x.x() << ", " << x.y() << ", " << x.z()
         << "): k = " << k(x);
      fail(ErrorKind::contract, os.str());
    }
  }
}

}  // namespace magorbit
