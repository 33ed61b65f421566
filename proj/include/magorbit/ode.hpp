#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <vector>

namespace magorbit {

// Continuous extension of one accepted Dormand-Prince step.
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  Eigen::VectorXd c[5];
  Eigen::VectorXd eval(double t) const;
};

struct OdeOptions {
  double tol = 1e-10;
  double h_max = std::numeric_limits<double>::infinity();
  double h_init = 0.0;  // 0 = automatic
  long max_steps = 2000000;
  // The integrator lands exactly on each of these times (sorted, inside (t0, t1]).
  std::vector<double> output_times;
};

struct OdeSolution {
  std::vector<double> times;               // accepted step endpoints, starting with t0
  std::vector<Eigen::VectorXd> states;     // after projection
  std::vector<DenseSegment> segments;      // segments[i] covers [times[i], times[i+1]]
  std::vector<double> output_times;        // the requested output times that were reached
  std::vector<Eigen::VectorXd> outputs;
  bool stopped_early = false;
  bool failed = false;
  long rhs_evaluations = 0;

  Eigen::VectorXd eval(double t) const;
  double t_end() const { return times.back(); }
};

using OdeRhs = std::function<void(double t, const Eigen::VectorXd& y, Eigen::VectorXd& dy)>;
using OdeProjection = std::function<void(Eigen::VectorXd& y)>;
// Called after each accepted step with the solution so far; return true to stop.
using OdeStop = std::function<bool(const OdeSolution& sol)>;

// Adaptive Dormand-Prince 5(4) with dense output. The projection (if any) is
// applied to every accepted state. On step-size underflow `failed` is set and the
// partial solution returned.
OdeSolution dopri5(const OdeRhs& f, const Eigen::VectorXd& y0, double t0, double t1, const OdeOptions& opt,
                   const OdeProjection& project = {}, const OdeStop& stop = {});

}  // namespace magorbit
