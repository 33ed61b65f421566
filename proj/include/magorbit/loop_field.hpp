#pragma once

#include <vector>

#include <Eigen/Dense>

#include "magorbit/curvature.hpp"
#include "magorbit/sphere_geometry.hpp"

namespace magorbit {

// A closed curve sampled at n equispaced parameters t_j = j / n on [0, 1).
// Derivatives are spectral (trigonometric interpolation).
class LoopGrid {
 public:
  explicit LoopGrid(std::vector<Vec3> points);

  int size() const noexcept { return static_cast<int>(points_.size()); }
  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<Vec3>& velocities() const noexcept { return velocities_; }
  const std::vector<Vec3>& accelerations() const noexcept { return accelerations_; }
  const Eigen::MatrixXd& derivative() const noexcept { return D_; }

  // Trigonometric resampling at t_j + shift, projected back to the sphere.
  LoopGrid shifted(double shift) const;
  // Grid rotated by an integer number of samples (exact).
  LoopGrid rolled(int samples) const;

 private:
  std::vector<Vec3> points_, velocities_, accelerations_;
  Eigen::MatrixXd D_;
};

// Periodic spectral differentiation matrix on n equispaced points of [0, 1).
Eigen::MatrixXd spectral_derivative(int n);

// Tangent field along a loop in the g-orthonormal moving frame (E1, E2) = e^{-u}(T, x x T).
struct FrameField {
  Eigen::VectorXd tangential, normal;
};

// Covariant rotation rate of the moving frame: geodesic curvature times g-speed.
Eigen::VectorXd frame_rotation_rate(const ConformalMetric& m, const LoopGrid& loop);
FrameField frame_components(const ConformalMetric& m, const LoopGrid& loop, const std::vector<Vec3>& field);
std::vector<Vec3> frame_reconstruct(const ConformalMetric& m, const LoopGrid& loop, const FrameField& f);

struct LoopField {
  std::vector<Vec3> values;
  FrameField frame;
  double norm_h22 = 0.0;  // sqrt of the trapezoid integral of |(-D^2 + 1) X|_g^2
};

// (-D^2 + 1) applied spectrally in frame components.
FrameField apply_helmholtz(const ConformalMetric& m, const LoopGrid& loop, const FrameField& f);
LoopField apply_helmholtz_inverse(const ConformalMetric& m, const LoopGrid& loop, const FrameField& rhs);
LoopField apply_helmholtz_inverse(const ConformalMetric& m, const LoopGrid& loop, const std::vector<Vec3>& rhs);

// Zero exactly on the closed solutions with constant speed.
LoopField x_field(const ConformalMetric& m, const CurvatureFunction& k, const LoopGrid& loop);
// (-D^2 + 1)^{-1} of the velocity.
LoopField w_field(const ConformalMetric& m, const LoopGrid& loop);

// Pairing <A, B> = trapezoid <(-D^2 + 1) A, (-D^2 + 1) B>_g.
double h22_inner(const ConformalMetric& m, const LoopGrid& loop, const FrameField& a, const FrameField& b);
// |<X, W>| / (max(|X|, 1e-6) |W|).
double orthogonality_defect(const ConformalMetric& m, const CurvatureFunction& k, const LoopGrid& loop);

}  // namespace magorbit
