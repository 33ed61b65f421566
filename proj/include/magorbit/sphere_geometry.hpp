#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace magorbit {

using Vec3 = Eigen::Vector3d;
using Json = nlohmann::json;

inline const Vec3 kE1{1.0, 0.0, 0.0};
inline const Vec3 kE2{0.0, 1.0, 0.0};
inline const Vec3 kE3{0.0, 0.0, 1.0};

// Point of the unit sphere. Construction normalizes.
class SurfacePoint {
 public:
  explicit SurfacePoint(const Vec3& x);
  const Vec3& x() const noexcept { return x_; }

 private:
  Vec3 x_;
};

// Tangent vector; construction removes the normal component.
class TangentVector {
 public:
  TangentVector(const SurfacePoint& base, const Vec3& v);
  const SurfacePoint& base() const noexcept { return base_; }
  const Vec3& v() const noexcept { return v_; }

 private:
  SurfacePoint base_;
  Vec3 v_;
};

// Tangential projection at x (x must be unit).
inline Vec3 tangent_part(const Vec3& x, const Vec3& v) { return v - x.dot(v) * x; }

// g = e^{2u} g0 on the unit sphere. u, its round gradient and round Laplacian
// are supplied as evaluators on unit vectors.
class ConformalMetric {
 public:
  using ScalarField = std::function<double(const Vec3&)>;
  using VectorField = std::function<Vec3(const Vec3&)>;

  ConformalMetric(std::string id, ScalarField u, VectorField grad0_u, ScalarField lap0_u,
                  Json spec = Json::object(), bool round = false);

  static ConformalMetric round();
  static ConformalMetric constant(double c);
  // u(x) = sum_{n>=1} coeffs[n-1] <x,e3>^n
  static ConformalMetric zonal(const std::vector<double>& coeffs);
  struct HarmonicTerm {
    int l;
    int m;
    double coeff;
  };
  // u is a sum of real solid harmonics of degree l <= 3 restricted to the sphere.
  static ConformalMetric harmonic(const std::vector<HarmonicTerm>& terms);
  static ConformalMetric from_json(const Json& j);

  double u(const Vec3& x) const { return u_(x); }
  Vec3 grad0_u(const Vec3& x) const { return grad_(x); }
  double lap0_u(const Vec3& x) const { return lap_(x); }
  double factor(const Vec3& x) const;  // e^{2u}

  const std::string& id() const noexcept { return id_; }
  const Json& spec() const noexcept { return spec_; }
  bool is_round() const noexcept { return round_; }

 private:
  std::string id_;
  ScalarField u_;
  VectorField grad_;
  ScalarField lap_;
  Json spec_;
  bool round_;
};

// Value and ambient gradient of a real solid harmonic (homogeneous of degree l).
double solid_harmonic(int l, int m, const Vec3& x, Vec3* gradient = nullptr);

double metric_inner(const ConformalMetric& m, const SurfacePoint& at, const TangentVector& a,
                    const TangentVector& b);
TangentVector rotate(const ConformalMetric& m, const SurfacePoint& at, const TangentVector& a);
double gauss_curvature(const ConformalMetric& m, const SurfacePoint& at);
TangentVector covariant_accel(const ConformalMetric& m, const SurfacePoint& at, const Vec3& velocity,
                              const Vec3& accel);

// Unchecked kernels on raw vectors; x unit, vectors tangent at x.
double inner(const ConformalMetric& m, const Vec3& x, const Vec3& a, const Vec3& b);
double gauss_curvature(const ConformalMetric& m, const Vec3& x);
// Connection correction: D_t V = dV/dt + connection(m, x, xdot, V) for V tangent along a curve.
Vec3 connection(const ConformalMetric& m, const Vec3& x, const Vec3& a, const Vec3& b);
Vec3 covariant_accel(const ConformalMetric& m, const Vec3& x, const Vec3& velocity, const Vec3& accel);

struct Quadrature {
  int level = 0;
  std::vector<Vec3> nodes;       // triangle centroids projected to the sphere
  std::vector<double> weights;   // exact spherical triangle areas (round metric)
  std::vector<Eigen::Vector3i> triangles;
  std::vector<Vec3> vertices;
};

inline constexpr int kDefaultQuadratureLevel = 5;

// Icosahedron subdivided with frequency 2^level.
Quadrature icosahedral_quadrature(int level);
Quadrature quadrature(const ConformalMetric& m, int level = kDefaultQuadratureLevel);
double volume(const ConformalMetric& m, const Quadrature& q);
double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

struct Extremes {
  double inf = 0.0;
  double sup = 0.0;
  double margin = 0.0;
  bool heuristic = true;
  Vec3 argmin = kE3;
  Vec3 argmax = kE3;
};

// Grid extremes on the icosahedral vertices plus one local refinement pass.
Extremes field_extremes(const std::function<double(const Vec3&)>& f, int level = 5,
                        std::optional<double> lipschitz = std::nullopt);

// Orthonormal pair spanning the tangent plane at x.
void tangent_basis(const Vec3& x, Vec3& e1, Vec3& e2);

}  // namespace magorbit
