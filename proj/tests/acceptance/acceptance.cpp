// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "magorbit/apriori_audit.hpp"
#include "magorbit/closed_orbits.hpp"
#include "magorbit/errors.hpp"
#include "magorbit/loop_field.hpp"
#include "magorbit/poincare.hpp"
#include "magorbit/reduction.hpp"
#include "magorbit/variational.hpp"

using namespace magorbit;

namespace tol {
constexpr double latitude_radius = 1e-6;
constexpr double latitude_seconds = 60.0;  // per k0
constexpr double two_orbit_seconds = 300.0;
constexpr double reduced_coefficient = 1e-12;
constexpr double reduced_seconds = 1.0;
constexpr double speed_drift = 1e-9;
constexpr double pairing_drift = 1e-7;
constexpr double block_det = 1e-6;
constexpr double orthogonality = 1e-7;
constexpr double kernel_fixed = 1e-6;
constexpr double kernel_moved = 1e-2;  // W0 must move by at least this
constexpr double gb_latitude = 1e-10;
constexpr double gb_perturbed = 1e-3;
constexpr double complement = 1e-6;
constexpr double homotopy_seconds = 600.0;
constexpr double fd_entry = 1e-4;
}  // namespace tol

namespace {

int failures = 0;

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

// Runs a criterion; a thrown library error counts as a failure with its message.
void criterion(int id, const std::string& title, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [pass, detail] = body();
    report(id, title, pass, detail);
  } catch (const std::exception& e) {
    report(id, title, false, std::string("error: ") + e.what());
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

CurvatureFunction height_perturbed(double k0, double eps) {
  return CurvatureFunction::combine(1.0, CurvatureFunction::constant(k0), eps, CurvatureFunction::height());
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_tangent(std::mt19937_64& rng, const Vec3& x) {
  std::normal_distribution<double> n(0.0, 1.0);
  return tangent_part(x, Vec3(n(rng), n(rng), n(rng)));
}

// Plane fit by the centroid of time-uniform samples: for a round circle traversed at
// constant speed the centroid is d w, with d the plane's distance from the origin.
struct CircleFit {
  double radius = 0.0;
  double planarity = 0.0;  // max |<x, w> - d|
};

CircleFit fit_circle(const Trajectory& traj, double period, int n = 256) {
  std::vector<Vec3> pts;
  Vec3 c = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    pts.push_back(traj.at(period * i / n).x);
    c += pts.back();
  }
  c /= n;
  const double d = c.norm();
  const Vec3 w = c / d;
  CircleFit f;
  f.radius = std::sqrt(1 - d * d);
  for (const auto& p : pts) f.planarity = std::max(f.planarity, std::abs(p.dot(w) - d));
  return f;
}

// Perturbed orbits of k = 1 + eps z found by 200-seed multistart; shared by criteria 2, 4, 5, 10.
std::vector<std::pair<double, std::vector<ClosedOrbit>>> two_orbit_runs;

Eigen::Matrix2d fd_return(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec, double h) {
  Eigen::Matrix2d D;
  ReturnOptions ro;
  ro.tol = 1e-13;
  for (int i = 0; i < 2; ++i) {
    const Eigen::Vector2d dz = h * Eigen::Vector2d::Unit(i);
    D.col(i) = (return_map(m, k, sec, dz, ro).z - return_map(m, k, sec, Eigen::Vector2d(-dz), ro).z) / (2 * h);
  }
  return D;
}

std::vector<Vec3> wobbly_loop(std::mt19937_64& rng, int n) {
  const Vec3 c = random_unit(rng);
  Vec3 e1, e2;
  tangent_basis(c, e1, e2);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a1 = U(rng), a2 = U(rng), ph = M_PI * U(rng), rho0 = 0.3 + 0.5 * (U(rng) + 1) / 2;
  std::vector<Vec3> pts;
  for (int j = 0; j < n; ++j) {
    const double t = 2 * M_PI * j / n;
    const double rho = rho0 * (1.0 + 0.3 * std::sin(2 * t + ph) / (1.2 + 0.5 * a1 * std::cos(3 * t)));
    const double lift = 0.1 * a2 * std::cos(t);
    pts.push_back((c * (1.0 + lift) + rho * (std::cos(t) * e1 + std::sin(t) * e2)).normalized());
  }
  return pts;
}

}  // namespace

int main() {
  const auto round = ConformalMetric::round();

  criterion(1, "latitude circles from 200-seed multistart", [&] {
    std::ostringstream d;
    bool ok = true;
    for (double k0 : {0.5, 1.0, 2.0}) {
      const auto t0 = Clock::now();
      const auto k = CurvatureFunction::constant(k0);
      const auto rep = multistart_search(round, k, 200, 1);
      const double expected = 1.0 / std::sqrt(1.0 + k0 * k0);
      double worst = 0.0;
      for (const auto& o : rep.orbits) {
        const auto f = fit_circle(o.trajectory, o.period);
        worst = std::max({worst, std::abs(f.radius - expected), f.planarity});
      }
      const double secs = seconds_since(t0);
      const bool pass = !rep.orbits.empty() && worst < tol::latitude_radius && secs <= tol::latitude_seconds;
      ok = ok && pass;
      d << "k0=" << k0 << ": " << rep.orbits.size() << " orbits, max radius/plane error " << fmt(worst) << ", "
        << fmt(secs) << " s; ";
    }
    return std::pair{ok, d.str()};
  });

  criterion(2, "exactly two simple orbits for k = 1 + eps z", [&] {
    std::ostringstream d;
    bool ok = true;
    const auto t0 = Clock::now();
    for (double eps : {0.005, 0.01, 0.02}) {
      const auto k = height_perturbed(1.0, eps);
      const auto rep = multistart_search(round, k, 200, 7);
      bool each = rep.orbits.size() == 2;
      std::ostringstream degs;
      for (const auto& o : rep.orbits) {
        each = each && o.simple && o.degree && *o.degree == -1;
        degs << (o.degree ? std::to_string(*o.degree) : "?") << " ";
      }
      int sum = 0;
      if (each) sum = degree_sum(rep.orbits);
      each = each && sum == -2;
      ok = ok && each;
      d << "eps=" << eps << ": " << rep.orbits.size() << " orbits, degrees " << degs.str() << "sum " << sum << "; ";
      two_orbit_runs.emplace_back(eps, rep.orbits);
    }
    const double secs = seconds_since(t0);
    ok = ok && secs <= tol::two_orbit_seconds;
    d << fmt(secs) << " s";
    return std::pair{ok, d.str()};
  });

  criterion(3, "reduced field closed form for the height perturbation", [&] {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.05, 0.98);
    const auto k1 = CurvatureFunction::height();
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      LatitudeFamily fam;
      fam.r = U(rng);
      fam.k0 = std::sqrt(1 - fam.r * fam.r) / fam.r;
      fam.frame.w = random_unit(rng);
      fam.frame.v1 = random_tangent(rng, fam.frame.w).normalized();
      fam.frame.v0 = fam.frame.w.cross(fam.frame.v1);
      const auto v = reduced_field(k1, fam);
      const double r = fam.r;
      const double C = -4 * M_PI * M_PI * r * r * r / (4 * M_PI * M_PI * r * r + 1);
      // Along W2, W3 the closed form projects the height gradient onto v1, v0.
      worst = std::max({worst, std::abs(v.a2 - C * fam.frame.v1.z()), std::abs(v.a3 - C * fam.frame.v0.z())});
    }
    const double secs = seconds_since(t0);
    return std::pair{worst < tol::reduced_coefficient && secs <= tol::reduced_seconds,
                     "20 random (r, frame), max error " + fmt(worst) + ", " + fmt(secs) + " s"};
  });

  criterion(4, "orbit degree = -index, index <= 1", [&] {
    const double c = std::cos(0.3), s = std::sin(0.3);
    Eigen::Matrix2d elliptic, hyperbolic, reflection;
    elliptic << c, -s, s, c;
    hyperbolic << 2.0, 1.0, 1.0, 1.0;
    reflection << -2.0, 0.0, 0.0, -0.5;
    const std::vector<std::pair<Eigen::Matrix2d, int>> fixtures = {{elliptic, 1}, {hyperbolic, -1}, {reflection, 1}};
    bool ok = true;
    std::ostringstream d;
    for (const auto& [A, expected] : fixtures) {
      const auto sd = index_from_linearization(A);
      // Independent index: winding of z -> (A - I) z on a circle.
      const auto wd = winding_index(
          [&](const Eigen::Vector2d& z) { return Eigen::Vector2d((A - Eigen::Matrix2d::Identity()) * z); }, 0.1, 1e-12);
      ok = ok && sd.index == expected && wd.index == expected && sd.index <= 1;
      d << sd.index << "/" << wd.index << " ";
    }
    int checked = 0;
    for (const auto& [eps, orbits] : two_orbit_runs) {
      const auto k = height_perturbed(1.0, eps);
      for (const auto& o : orbits) {
        const bool agree = o.degree && o.index && *o.degree == -o.index->index && o.index->index <= 1 &&
                           orbit_degree(round, k, o.trajectory, 0.6) == *o.degree;
        ok = ok && agree;
        ++checked;
      }
    }
    ok = ok && checked == 6;
    d << "(synthetic sign-det/winding); " << checked << " continued orbits checked on two sections";
    return std::pair{ok, d.str()};
  });

  criterion(5, "conservation suite", [&] {
    if (two_orbit_runs.empty() || two_orbit_runs[1].second.empty()) return std::pair{false, std::string("no orbits")};
    const auto k = height_perturbed(1.0, 0.01);
    const auto& orbit = two_orbit_runs[1].second.front();
    IntegrateOptions io;
    io.tol = 1e-10;
    io.restore_speed = false;
    const auto ten = integrate(round, k, orbit.initial, 10 * orbit.period, io);

    std::mt19937_64 rng(5);
    const Vec3& x = orbit.initial.x;
    const auto ev = jacobi_evolution(round, k, ten,
                                     {{random_tangent(rng, x), random_tangent(rng, x)},
                                      {random_tangent(rng, x), random_tangent(rng, x)}});
    const double pairing = std::max(pairing_drift(round, ev, 0), pairing_drift(round, ev, 1));

    double det = 0.0;
    for (const auto& [eps, orbits] : two_orbit_runs) {
      const auto ke = height_perturbed(1.0, eps);
      for (const auto& o : orbits) {
        const auto M = monodromy(round, ke, o.trajectory);
        det = std::max(det, std::abs(M.reduced_block(round, ke).determinant() - 1.0));
      }
    }

    std::mt19937_64 lrng(55);
    const auto kl = CurvatureFunction::linear(1.0, Vec3(0.2, -0.1, 0.3));
    const auto ml = ConformalMetric::harmonic({{1, 1, 0.1}, {2, 0, 0.05}, {3, -1, 0.02}});
    double ortho = 0.0;
    for (int i = 0; i < 50; ++i) ortho = std::max(ortho, orthogonality_defect(ml, kl, LoopGrid(wobbly_loop(lrng, 64))));

    const bool ok = ten.drift < tol::speed_drift && pairing < tol::pairing_drift && det < tol::block_det &&
                    ortho < tol::orthogonality;
    return std::pair{ok, "speed drift " + fmt(ten.drift) + ", pairing drift " + fmt(pairing) + ", |det-1| " +
                             fmt(det) + ", orthogonality " + fmt(ortho)};
  });

  criterion(6, "kernel structure of the unperturbed monodromy", [&] {
    double fixed = 0.0, moved = std::numeric_limits<double>::infinity();
    for (double k0 : {0.5, 1.0, 2.0}) {
      const double r = latitude_radius(k0);
      const LatitudeFrame fr;
      const auto k = CurvatureFunction::constant(k0);
      IntegrateOptions io;
      io.tol = 1e-12;
      const auto orbit = integrate(round, k, latitude_state(r, fr, 0), 1.0, io);
      const auto M = monodromy(round, k, orbit);
      const auto W = kernel_fields(r, fr, 0.0);
      for (int i = 1; i < 4; ++i) {
        const auto c = M.coords(round, W[i]);
        fixed = std::max(fixed, (M.matrix * c - c).norm());
      }
      const auto c0 = M.coords(round, W[0]);
      moved = std::min(moved, (M.matrix * c0 - c0).norm());
    }
    return std::pair{fixed < tol::kernel_fixed && moved > tol::kernel_moved,
                     "W1..W3 defect " + fmt(fixed) + ", W0 displacement " + fmt(moved)};
  });

  criterion(7, "Gauss-Bonnet audit", [&] {
    double lat = 0.0;
    for (double k0 : {0.5, 1.0, 2.0}) {
      const auto k = CurvatureFunction::constant(k0);
      const auto o = shoot(round, k, family_point(LatitudeFamily::from_k0(k0), 0.0));
      GaussBonnetOptions opt;
      opt.method = InteriorMethod::boundary;
      for (bool rev : {false, true}) {
        opt.reverse = rev;
        lat = std::max(lat, gauss_bonnet(round, k, o.trajectory, o.period, opt).residual);
      }
    }
    const auto zonal = ConformalMetric::zonal({0.1});
    const std::vector<CurvatureFunction> ks = {height_perturbed(1.0, 0.01),
                                               CurvatureFunction::linear(1.0, Vec3(0.05, 0.0, 0.2)),
                                               CurvatureFunction::zonal({1.2, 0.0, 0.1})};
    double pert = 0.0, comp = 0.0;
    int fixtures = 0;
    for (const auto* m : {&round, &zonal}) {
      for (const auto& k : ks) {
        for (const Vec3& axis : {kE3, Vec3(-kE3)}) {
          const auto fam = LatitudeFamily::from_axis(1.0, axis);
          const auto o = shoot(*m, k, with_g_speed(*m, family_point(fam, 0.0), 1.0));
          const auto gb = gauss_bonnet(*m, k, o.trajectory, o.period);
          if (!o.simple) fail(ErrorKind::invariant, "fixture orbit is not simple");
          pert = std::max(pert, gb.residual);
          comp = std::max(comp, std::abs(gb.interior_area + gb.exterior_area - gb.volume));
          ++fixtures;
        }
      }
    }
    return std::pair{lat < tol::gb_latitude && pert < tol::gb_perturbed && comp < tol::complement,
                     "latitude residual " + fmt(lat) + "; " + std::to_string(fixtures) +
                         " perturbed fixtures, max residual " + fmt(pert) + "; area complement " + fmt(comp)};
  });

  criterion(8, "hypothesis checker", [&] {
    const auto one = hypothesis_check(round, CurvatureFunction::constant(1.0));
    const auto weak = hypothesis_check(round, CurvatureFunction::constant(0.4));
    // K = 1: (K_pos) 2 inf k - sqrt(sup K) = 1, (pinch) 4 inf K - sup K = 3; k = 0.4: 0.8 - 1 < 0.
    const bool ok = one.positive.verdict == Verdict::satisfied && one.positive.slack > 0 &&
                    std::abs(one.positive.slack - 1.0) < 1e-12 && one.pinched.verdict == Verdict::satisfied &&
                    one.pinched.slack > 0 && std::abs(one.pinched.slack - 3.0) < 1e-12 &&
                    weak.positive.verdict == Verdict::failed;
    return std::pair{ok, std::string("k=1: K_pos ") + to_string(one.positive.verdict) + " (slack " +
                             fmt(one.positive.slack) + "), pinch " + to_string(one.pinched.verdict) + " (slack " +
                             fmt(one.pinched.slack) + "); k=0.4: K_pos " + to_string(weak.positive.verdict)};
  });

  criterion(9, "homotopy degree conservation", [&] {
    const auto t0 = Clock::now();
    ContinuationOptions opt;
    opt.steps = 10;
    const auto log =
        homotopy_continuation(ConformalMetric::zonal({0.1}), CurvatureFunction::zonal({1.0, 0.3}), 1.0, opt);
    const auto sums = log.degree_sums();
    int off = 0;
    for (const auto& [s, sum] : sums) off += sum != -2;
    const double secs = seconds_since(t0);
    const bool ok = log.terminated == 0 && off == 0 && !sums.empty() && log.final_degree_sum &&
                    *log.final_degree_sum == -2 && secs <= tol::homotopy_seconds;
    return std::pair{ok, std::to_string(sums.size()) + " recorded t, " + std::to_string(off) +
                             " with sum != -2, terminated " + std::to_string(log.terminated) + ", final sum " +
                             (log.final_degree_sum ? std::to_string(*log.final_degree_sum) : "none") + ", " +
                             fmt(secs) + " s"};
  });

  criterion(10, "monodromy return map against finite differences", [&] {
    struct Fixture {
      ConformalMetric m;
      CurvatureFunction k;
      PhaseState s;
      double period;
    };
    std::vector<Fixture> fx;
    for (const auto& [eps, orbits] : two_orbit_runs)
      if (eps == 0.02)
        for (const auto& o : orbits) fx.push_back({round, height_perturbed(1.0, eps), o.initial, o.period});
    const auto zonal = ConformalMetric::zonal({0.1});
    for (const auto& [m, k, axis] :
         std::vector<std::tuple<ConformalMetric, CurvatureFunction, Vec3>>{
             {zonal, height_perturbed(1.0, 0.05), kE3},
             {zonal, CurvatureFunction::zonal({1.2, 0.0, 0.1}), -kE3},
             {round, CurvatureFunction::linear(1.0, Vec3(0.05, 0.0, 0.2)), kE3}}) {
      const auto o = shoot(m, k, with_g_speed(m, family_point(LatitudeFamily::from_axis(1.0, axis), 0.0), 1.0));
      fx.push_back({m, k, o.initial, o.period});
    }
    double worst = 0.0;
    for (const auto& f : fx) {
      IntegrateOptions io;
      io.tol = 1e-13;
      const auto orbit = integrate(f.m, f.k, f.s, f.period, io);
      const auto M = monodromy(f.m, f.k, orbit);
      const Section sec(f.m, f.s, 0.0, FlowKind::prescribed, f.period);
      const auto dP = linearized_return(f.m, f.k, sec, M);
      const auto fd = fd_return(f.m, f.k, sec, 1e-5);
      worst = std::max(worst, (fd - dP).cwiseAbs().maxCoeff());
    }
    return std::pair{fx.size() == 5 && worst < tol::fd_entry,
                     std::to_string(fx.size()) + " orbits, max entry difference " + fmt(worst)};
  });

  std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
