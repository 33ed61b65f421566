#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "magorbit/sphere_geometry.hpp"

namespace magorbit {

// Target geodesic curvature k on the sphere. The gradient, when present, is the
// ambient gradient of some extension; only its tangential part is ever used.
class CurvatureFunction {
 public:
  using Value = std::function<double(const Vec3&)>;
  using Gradient = std::function<Vec3(const Vec3&)>;

  CurvatureFunction(std::string id, Value k, Gradient grad = {}, Json spec = Json());

  static CurvatureFunction constant(double c);
  // k(x) = sum_n coeffs[n] <x,e3>^n, n starting at 0.
  static CurvatureFunction zonal(const std::vector<double>& coeffs);
  // k(x) = c0 + <a, x>
  static CurvatureFunction linear(double c0, const Vec3& a);
  struct Monomial {
    double coeff;
    std::array<int, 3> powers;
  };
  static CurvatureFunction polynomial(const std::vector<Monomial>& terms);
  // The named perturbation k1(x) = <x,e3>.
  static CurvatureFunction height();
  // a*f + b*g
  static CurvatureFunction combine(double a, const CurvatureFunction& f, double b, const CurvatureFunction& g);
  static CurvatureFunction from_json(const Json& j);

  double operator()(const Vec3& x) const { return k_(x); }
  bool has_gradient() const noexcept { return static_cast<bool>(grad_); }
  Vec3 gradient(const Vec3& x) const;
  const std::string& id() const noexcept { return id_; }
  const Json& spec() const noexcept { return spec_; }
  // Constant value if the function is known to be constant.
  std::optional<double> constant_value() const noexcept { return constant_; }

 private:
  std::string id_;
  Value k_;
  Gradient grad_;
  Json spec_;
  std::optional<double> constant_;
};

// Throws a contract violation if k <= 0 at a vertex of the level-3 icosahedral grid.
void check_positive(const CurvatureFunction& k);

}  // namespace magorbit
