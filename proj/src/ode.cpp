#include "magorbit/ode.hpp"

#include <algorithm>
#include <cmath>

#include "magorbit/errors.hpp"

namespace magorbit {

namespace {

// Dormand & Prince (1980) coefficients with Shampine's dense output.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y0, const Eigen::VectorXd& y1, double tol) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = tol + tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(err.size()));
}

}  // namespace

Eigen::VectorXd DenseSegment::eval(double t) const {
  const double th = h == 0.0 ? 0.0 : (t - t0) / h;
  const double th1 = 1.0 - th;
  return c[0] + th * (c[1] + th1 * (c[2] + th * (c[3] + th1 * c[4])));
}

Eigen::VectorXd OdeSolution::eval(double t) const {
  require(!times.empty(), "OdeSolution::eval on empty solution");
  if (segments.empty()) return states.front();
  auto it = std::upper_bound(times.begin(), times.end(), t);
  std::size_t idx = it == times.begin() ? 0 : static_cast<std::size_t>(it - times.begin()) - 1;
  idx = std::min(idx, segments.size() - 1);
  // Exact hits return the stored (projected) state.
  if (t == times[idx]) return states[idx];
  if (t == times[idx + 1]) return states[idx + 1];
  return segments[idx].eval(t);
}

OdeSolution dopri5(const OdeRhs& f, const Eigen::VectorXd& y0, double t0, double t1, const OdeOptions& opt,
                   const OdeProjection& project, const OdeStop& stop) {
  require(t1 > t0, "dopri5: t1 must exceed t0");
  require(opt.tol > 0.0, "dopri5: tol must be positive");
  const Eigen::Index n = y0.size();
  OdeSolution sol;
  Eigen::VectorXd y = y0;
  if (project) project(y);
  sol.times.push_back(t0);
  sol.states.push_back(y);

  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), yt(n), y1(n), err(n);
  auto call = [&](double t, const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    f(t, in, out);
    ++sol.rhs_evaluations;
  };

  double t = t0;
  call(t, y, k1);
  double h = opt.h_init;
  if (h <= 0.0) {
    // Hairer's starting step heuristic.
    const double d0 = y.norm() / std::sqrt(static_cast<double>(n)) + 1e-30;
    const double dd1 = k1.norm() / std::sqrt(static_cast<double>(n)) + 1e-30;
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, t1 - t0);
    yt = y + h0 * k1;
    call(t + h0, yt, k2);
    const double d2 = (k2 - k1).norm() / std::sqrt(static_cast<double>(n)) / h0;
    const double h1 = std::max(d2, dd1) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                  : std::pow(0.01 / std::max(d2, dd1), 1.0 / 5.0);
    h = std::min(100 * h0, h1);
  }
  h = std::min({h, opt.h_max, t1 - t0});

  std::size_t next_out = 0;
  const auto& outs = opt.output_times;
  while (next_out < outs.size() && outs[next_out] <= t0) ++next_out;

  double err_prev = 1e-4;
  long steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) {
      sol.failed = true;
      return sol;
    }
    double target = t1;
    bool hit_output = false;
    bool clipped = false;
    const double h_free = h;
    if (next_out < outs.size() && outs[next_out] < t1) target = outs[next_out];
    if (t + h >= target || target - (t + h) < 1e-12 * std::max(1.0, std::abs(target))) {
      h = target - t;
      clipped = true;
      hit_output = next_out < outs.size() && target == outs[next_out];
    }
    if (h <= 1e-14 * std::max(1.0, std::abs(t))) {
      sol.failed = true;
      return sol;
    }
    yt = y + h * a21 * k1;
    call(t + c2 * h, yt, k2);
    yt = y + h * (a31 * k1 + a32 * k2);
    call(t + c3 * h, yt, k3);
    yt = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    call(t + c4 * h, yt, k4);
    yt = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    call(t + c5 * h, yt, k5);
    yt = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    call(t + h, yt, k6);
    y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    call(t + h, y1, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, y1, opt.tol);
    if (!std::isfinite(en)) {
      h *= 0.1;
      continue;
    }
    if (en <= 1.0) {
      DenseSegment seg;
      seg.t0 = t;
      seg.h = h;
      seg.c[0] = y;
      const Eigen::VectorXd ydiff = y1 - y;
      const Eigen::VectorXd bspl = h * k1 - ydiff;
      seg.c[1] = ydiff;
      seg.c[2] = bspl;
      seg.c[3] = ydiff - h * k7 - bspl;
      seg.c[4] = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      const double t_new = clipped ? target : t + h;
      y = y1;
      if (project) project(y);
      t = t_new;
      sol.segments.push_back(std::move(seg));
      sol.times.push_back(t);
      sol.states.push_back(y);
      if (hit_output) {
        sol.output_times.push_back(t);
        sol.outputs.push_back(y);
        ++next_out;
      }
      if (project)
        call(t, y, k1);
      else
        k1 = k7;
      // PI step-size control.
      const double enc = std::max(en, 1e-10);
      double fac = 0.9 * std::pow(enc, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(en, 1e-4);
      h = std::min(clipped ? std::max(h_free, h * fac) : h * fac, opt.h_max);
      if (stop && stop(sol)) {
        sol.stopped_early = true;
        return sol;
      }
    } else {
      h *= std::max(0.2, 0.9 * std::pow(en, -1.0 / 5.0));
    }
  }
  return sol;
}

}  // namespace magorbit
