#include "magorbit/closed_orbits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

#include "magorbit/errors.hpp"
#include "magorbit/variational.hpp"

namespace magorbit {

double period_guess(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& s) {
  const double eu = std::exp(m.u(s.x));
  const double kappa = eu * k(s.x);
  return 2 * M_PI * eu / std::sqrt(1.0 + kappa * kappa);
}

namespace {

using Vec4 = Eigen::Vector4d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

struct Frame {
  Vec3 t, n;
  explicit Frame(const PhaseState& s) : t(s.v.normalized()), n(s.x.cross(s.v.normalized())) {}
  Vec4 project(const Vec3& dx, const Vec3& dv) const { return {dx.dot(t), dx.dot(n), dv.dot(t), dv.dot(n)}; }
};

using Evaluation = ShootingEvaluation;

double condition_number(const Mat43& J) {
  Eigen::JacobiSVD<Mat43> svd(J);
  const auto& s = svd.singularValues();
  return s[2] > 0.0 ? s[0] / s[2] : std::numeric_limits<double>::infinity();
}

}  // namespace

ShootingEvaluation shooting_residual(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec,
                                     const Eigen::Vector3d& p, const ShootOptions& opt, bool with_jacobian) {
  Evaluation e;
  const Eigen::Vector2d z = p.head<2>();
  e.start = sec.point(m, z);
  const Frame f(e.start);
  if (!with_jacobian) {
    IntegrateOptions io;
    io.tol = opt.tol;
    io.kind = opt.kind;
    e.end = integrate(m, k, e.start, p[2], io).final();
    e.residual = f.project(e.end.x - e.start.x, e.end.v - e.start.v);
    return e;
  }
  const auto cols = sec.tangent(m, z);
  std::vector<JacobiState> init = {from_ambient(m, e.start, cols[0]), from_ambient(m, e.start, cols[1])};
  JacobiOptions jo;
  jo.tol = opt.tol;
  const auto ev = jacobi_evolution(opt.kind, m, k, e.start, p[2], init, jo);
  e.end = ev.base.back();
  e.residual = f.project(e.end.x - e.start.x, e.end.v - e.start.v);
  for (int i = 0; i < 2; ++i) {
    const PhaseVariation dT = to_ambient(m, e.end, ev.final()[i]);
    e.jacobian.col(i) = f.project(dT.dx - cols[i].dx, dT.dv - cols[i].dv);
  }
  e.jacobian.col(2) = f.project(e.end.v, flow_accel(opt.kind, m, k, e.end.x, e.end.v));
  return e;
}

namespace {

Evaluation evaluate(const ConformalMetric& m, const CurvatureFunction& k, const Section& sec, const Eigen::Vector3d& p,
                    const ShootOptions& opt) {
  return shooting_residual(m, k, sec, p, opt, true);
}

}  // namespace

ClosedOrbit shoot(const ConformalMetric& m, const CurvatureFunction& k, const PhaseState& guess, double period,
                  const ShootOptions& opt) {
  require(guess.v.norm() > 0.0, "shoot: guess has zero velocity");
  const PhaseState theta = with_g_speed(m, make_state(guess.x, guess.v), 1.0);
  const double Tg = period > 0.0 ? period : period_guess(m, k, theta);
  const Section sec(m, theta, 0.0, opt.kind, Tg);
  Eigen::Vector3d p(0.0, 0.0, Tg);
  Evaluation e = evaluate(m, k, sec, p, opt);
  double rn = e.residual.norm();
  int it = 0;
  bool converged = rn < opt.target;
  while (!converged && it < opt.max_iterations) {
    ++it;
    Eigen::JacobiSVD<Mat43> svd(e.jacobian, Eigen::ComputeFullU | Eigen::ComputeFullV);
    svd.setThreshold(1e-9);
    Eigen::Vector3d step = -svd.solve(e.residual);
    const double zmax = step.head<2>().cwiseAbs().maxCoeff();
    if (zmax > opt.max_step) step *= opt.max_step / zmax;
    // Backtracking on the residual norm.
    double lambda = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 8; ++ls) {
      const Eigen::Vector3d q = p + lambda * step;
      if (q[2] <= 0.0) {
        lambda *= 0.5;
        continue;
      }
      Evaluation trial;
      try {
        trial = evaluate(m, k, sec, q, opt);
      } catch (const Error&) {
        lambda *= 0.5;
        continue;
      }
      const double tn = trial.residual.norm();
      if (tn < (1.0 - 1e-4 * lambda) * rn || tn < opt.target) {
        p = q;
        e = std::move(trial);
        rn = tn;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (std::abs(p[2] - Tg) > opt.period_window * Tg)
      fail(ErrorKind::no_convergence, "shoot: period left the window around the guess");
    converged = rn < opt.target;
    if (!accepted && !converged) {
      if (condition_number(e.jacobian) > 1e12)
        fail(ErrorKind::degenerate, "shoot: Newton stalled on a degenerate Jacobian");
      fail(ErrorKind::no_convergence, "shoot: Newton stagnated at residual " + std::to_string(rn));
    }
    if ((lambda * step).norm() < 1e-14 && !converged)
      fail(ErrorKind::no_convergence, "shoot: Newton step below 1e-14 at residual " + std::to_string(rn));
  }
  if (!converged) {
    if (condition_number(e.jacobian) > 1e12)
      fail(ErrorKind::degenerate, "shoot: no convergence on a degenerate Jacobian");
    fail(ErrorKind::no_convergence, "shoot: no convergence in " + std::to_string(opt.max_iterations) + " iterations");
  }

  ClosedOrbit orbit;
  orbit.initial = e.start;
  orbit.period = p[2];
  orbit.iterations = it;
  orbit.condition = condition_number(e.jacobian);
  IntegrateOptions io;
  io.tol = opt.tol;
  io.kind = opt.kind;
  for (int i = 1; i <= opt.samples; ++i) io.output_times.push_back(orbit.period * i / opt.samples);
  io.output_times.back() = orbit.period;
  orbit.trajectory = integrate(m, k, orbit.initial, orbit.period, io);
  const PhaseState& fin = orbit.trajectory.final();
  orbit.residual = std::max((fin.x - orbit.initial.x).norm(), (fin.v - orbit.initial.v).norm());
  if (orbit.residual > 1e-8)
    fail(ErrorKind::no_convergence, "shoot: closure residual " + std::to_string(orbit.residual) + " above 1e-8");
  const Simplicity simp = is_simple(orbit.trajectory);
  orbit.simple = simp.simple;
  orbit.simple_inconclusive = simp.inconclusive;
  orbit.multiplicity = covering_multiplicity(orbit.trajectory);
  if (opt.classify) classify(m, k, orbit, opt);
  return orbit;
}

void classify(const ConformalMetric& m, const CurvatureFunction& k, ClosedOrbit& orbit, const ShootOptions& opt) {
  const Section sec(m, orbit.initial, 0.0, orbit.trajectory.kind, orbit.period);
  const Monodromy M = monodromy(m, k, orbit.trajectory, std::min(opt.tol * 10, 1e-11));
  orbit.dP = linearized_return(m, k, sec, M);
  orbit.degree.reset();
  orbit.index.reset();
  if (std::abs((orbit.dP - Eigen::Matrix2d::Identity()).determinant()) > kDegeneracyThreshold) {
    orbit.index = index_from_linearization(orbit.dP);
  } else if (opt.winding_fallback) {
    try {
      orbit.index = fixed_point_index(m, k, sec, orbit.period, opt.winding_radius);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::uncertified) throw;
    }
  }
  if (orbit.index) {
    if (orbit.index->index > 1) fail(ErrorKind::invariant, "orbit index above 1");
    orbit.degree = -orbit.index->index;
  }
}

namespace {

// Uniform double in [0, 1) from raw generator bits, identical on every platform.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q[i] = 2.0 * uniform01(rng) - 1.0;
  } while (q.squaredNorm() > 1.0 || q.squaredNorm() < 1e-6);
  q.normalize();
  return Eigen::Quaterniond(q[0], q[1], q[2], q[3]).toRotationMatrix();
}

}  // namespace

std::vector<PhaseState> seed_states(const ConformalMetric& m, int n_seeds, std::uint64_t rng_seed) {
  require(n_seeds >= 1, "multistart: n_seeds must be at least 1");
  std::mt19937_64 rng(rng_seed);
  const Eigen::Matrix3d R = random_rotation(rng);
  const int positions = (n_seeds + 7) / 8;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  std::vector<PhaseState> seeds;
  for (int i = 0; i < positions && static_cast<int>(seeds.size()) < n_seeds; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / positions;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 p(rho * std::cos(golden * i), rho * std::sin(golden * i), z);
    Vec3 e1, e2;
    tangent_basis(p, e1, e2);
    const Vec3 x = R * p;
    for (int j = 0; j < 8 && static_cast<int>(seeds.size()) < n_seeds; ++j) {
      const double a = 2 * M_PI * j / 8;
      const Vec3 dir = R * (std::cos(a) * e1 + std::sin(a) * e2);
      seeds.push_back({x, std::exp(-m.u(x)) * dir});
    }
  }
  return seeds;
}

SearchReport multistart_search(const ConformalMetric& m, const CurvatureFunction& k, int n_seeds,
                               std::uint64_t rng_seed, const ShootOptions& opt) {
  SearchReport rep;
  const auto seeds = seed_states(m, n_seeds, rng_seed);
  rep.seeds = static_cast<int>(seeds.size());
  ShootOptions local = opt;
  local.classify = false;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    ClosedOrbit o;
    try {
      o = shoot(m, k, seeds[i], 0.0, local);
    } catch (const Error& e) {
      ++rep.failures[to_string(e.kind())];
      continue;
    }
    ++rep.converged;
    if (!o.simple || o.simple_inconclusive) {
      ++rep.not_simple;
      continue;
    }
    bool dup = false;
    for (const auto& prev : rep.orbits)
      if (dedup_mod_s1(prev, o)) {
        dup = true;
        break;
      }
    if (dup) {
      ++rep.duplicates;
      continue;
    }
    o.provenance = "seed:" + std::to_string(i) + "/rng:" + std::to_string(rng_seed);
    if (opt.classify) classify(m, k, o, opt);
    rep.orbits.push_back(std::move(o));
  }
  return rep;
}

double orbit_distance(const Trajectory& a, const Trajectory& b) {
  const double Ta = a.duration(), Tb = b.duration();
  auto b_at = [&](double tau) {
    double t = std::fmod(tau, Tb);
    if (t < 0.0) t += Tb;
    return b.at(b.t0() + t);
  };
  const PhaseState a0 = a.initial();
  auto gap = [&](double tau) {
    const PhaseState s = b_at(tau);
    return (s.x - a0.x).squaredNorm() + (s.v - a0.v).squaredNorm();
  };
  const int grid = 256;
  int best = 0;
  double bestv = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double g = gap(Tb * i / grid);
    if (g < bestv) {
      bestv = g;
      best = i;
    }
  }
  // Golden-section refinement on the bracketing cells.
  double lo = Tb * (best - 1) / grid, hi = Tb * (best + 1) / grid;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
  double fc = gap(c), fd = gap(d);
  for (int it = 0; it < 80 && hi - lo > 1e-13 * std::max(1.0, Tb); ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = gap(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = gap(d);
    }
  }
  const double tau = 0.5 * (lo + hi);
  double dist = 0.0;
  const int samples = 64;
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / samples;
    const PhaseState pa = a.at(a.t0() + s * Ta);
    const PhaseState pb = b_at(tau + s * Tb);
    dist = std::max(dist, std::sqrt((pa.x - pb.x).squaredNorm() + (pa.v - pb.v).squaredNorm()));
  }
  return dist;
}

bool dedup_mod_s1(const ClosedOrbit& a, const ClosedOrbit& b, double threshold) {
  if (std::abs(a.period - b.period) > threshold * std::max(1.0, a.period)) return false;
  return orbit_distance(a.trajectory, b.trajectory) < threshold;
}

namespace {

std::vector<Vec3> sample_loop(const Trajectory& tr, int samples) {
  require(samples >= 8, "loop sampling needs at least 8 points");
  std::vector<Vec3> pts(samples);
  for (int i = 0; i < samples; ++i) pts[i] = tr.at(tr.t0() + tr.duration() * i / samples).x.normalized();
  return pts;
}

double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  // Closest points of two 3D segments (clamped parameters).
  const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  const double c = d1.dot(r), b = d1.dot(d2), den = a * e - b * b;
  if (den > 1e-300) s = std::clamp((b * f - c * e) / den, 0.0, 1.0);
  t = e > 0.0 ? (b * s + f) / e : 0.0;
  if (t < 0.0) {
    t = 0.0;
    s = a > 0.0 ? std::clamp(-c / a, 0.0, 1.0) : 0.0;
  } else if (t > 1.0) {
    t = 1.0;
    s = a > 0.0 ? std::clamp((b - c) / a, 0.0, 1.0) : 0.0;
  }
  return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

bool on_arc(const Vec3& a, const Vec3& b, const Vec3& n, const Vec3& p) {
  return a.cross(p).dot(n) >= 0.0 && p.cross(b).dot(n) >= 0.0 && p.dot(a + b) > 0.0;
}

enum class Contact { none, crossing, overlap, near };

Contact arc_contact(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  constexpr double kNear = 1e-7;
  const Vec3 n1 = a.cross(b), n2 = c.cross(d);
  const Vec3 L = n1.cross(n2);
  const double dist = segment_distance(a, b, c, d);
  if (L.norm() <= 1e-12 * n1.norm() * n2.norm()) {
    if (dist >= kNear) return Contact::none;
    // Same great circle: a retrace needs a shared stretch, touching ends are only near.
    const Vec3 w = n1.normalized().cross(a);
    auto angle = [&](const Vec3& p) { return std::atan2(p.dot(w), p.dot(a)); };
    const double ab = angle(b), ac = angle(c), ad = angle(d);
    const double shared = std::min(ab, std::max(ac, ad)) - std::max(0.0, std::min(ac, ad));
    return shared > kNear ? Contact::overlap : Contact::near;
  }
  const Vec3 P = L.normalized();
  for (const Vec3& cand : {P, Vec3(-P)})
    if (on_arc(a, b, n1, cand) && on_arc(c, d, n2, cand)) return Contact::crossing;
  return dist < kNear ? Contact::near : Contact::none;
}

}  // namespace

Simplicity is_simple(const std::vector<Vec3>& loop) {
  const int N = static_cast<int>(loop.size());
  require(N >= 4, "is_simple: loop too short");
  double hmax = 0.0;
  for (int i = 0; i < N; ++i) hmax = std::max(hmax, (loop[(i + 1) % N] - loop[i]).norm());
  const double cell = std::max(2.0 * hmax, 1e-9);
  auto key = [&](const Vec3& p) {
    const auto q = (p / cell).array().floor().cast<std::int64_t>();
    return ((q[0] + (1 << 20)) << 42) ^ ((q[1] + (1 << 20)) << 21) ^ (q[2] + (1 << 20));
  };
  std::unordered_map<std::int64_t, std::vector<int>> grid;
  for (int i = 0; i < N; ++i) grid[key(0.5 * (loop[i] + loop[(i + 1) % N]))].push_back(i);

  Simplicity out;
  out.min_separation = std::numeric_limits<double>::infinity();
  bool crossing = false, near = false;
  for (int i = 0; i < N && !crossing; ++i) {
    const Vec3 mid = 0.5 * (loop[i] + loop[(i + 1) % N]);
    const auto base = (mid / cell).array().floor().cast<std::int64_t>();
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const std::int64_t kk = ((base[0] + dx + (1 << 20)) << 42) ^ ((base[1] + dy + (1 << 20)) << 21) ^
                                  (base[2] + dz + (1 << 20));
          auto it = grid.find(kk);
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j <= i) continue;
            const int gapij = std::min(j - i, N - (j - i));
            if (gapij <= 1) continue;
            const Vec3 &a = loop[i], &b = loop[(i + 1) % N], &c = loop[j], &d = loop[(j + 1) % N];
            out.min_separation = std::min(out.min_separation, segment_distance(a, b, c, d));
            switch (arc_contact(a, b, c, d)) {
              case Contact::crossing:
              case Contact::overlap:
                crossing = true;
                break;
              case Contact::near:
                near = true;
                break;
              case Contact::none:
                break;
            }
          }
        }
  }
  out.simple = !crossing && !near;
  out.inconclusive = !crossing && near;
  return out;
}

Simplicity is_simple(const Trajectory& closed, int samples) { return is_simple(sample_loop(closed, samples)); }

int covering_multiplicity(const std::vector<Vec3>& loop) {
  const int N = static_cast<int>(loop.size());
  require(N >= 4, "covering_multiplicity: loop too short");
  Vec3 c = Vec3::Zero();
  for (const auto& p : loop) c += p;
  if (c.norm() < 1e-8 * N) {
    // Balanced loop (a great circle, say): look from the normal of its best-fit plane.
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
    for (const auto& p : loop) S += p * p.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(S);
    c = es.eigenvectors().col(0);
  }
  c.normalize();
  Vec3 e1, e2;
  tangent_basis(c, e1, e2);
  // Stereographic projection from -c.
  std::vector<Eigen::Vector2d> q(N);
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (int i = 0; i < N; ++i) {
    const double den = std::max(1.0 + loop[i].dot(c), 1e-12);
    q[i] = Eigen::Vector2d(loop[i].dot(e1), loop[i].dot(e2)) / den;
    centroid += q[i];
  }
  centroid /= N;
  double scale = 0.0;
  for (const auto& p : q) scale = std::max(scale, (p - centroid).norm());
  auto winding = [&](const Eigen::Vector2d& o) {
    double total = 0.0;
    for (int i = 0; i < N; ++i) {
      const Eigen::Vector2d a = q[i] - o, b = q[(i + 1) % N] - o;
      total += std::atan2(a[0] * b[1] - a[1] * b[0], a.dot(b));
    }
    return static_cast<int>(std::lround(std::abs(total) / (2 * M_PI)));
  };
  const int w0 = winding(centroid);
  std::map<int, int> votes;
  votes[w0] += 1;
  bool agree = true;
  for (int j = 0; j < 4; ++j) {
    const double a = M_PI / 4 + j * M_PI / 2;
    const int w = winding(centroid + 0.01 * scale * Eigen::Vector2d(std::cos(a), std::sin(a)));
    votes[w] += 1;
    agree = agree && w == w0;
  }
  if (agree) return w0;
  int best = w0, count = 0;
  for (const auto& [w, n] : votes)
    if (n > count) {
      best = w;
      count = n;
    }
  return best;
}

int covering_multiplicity(const Trajectory& closed, int samples) {
  return covering_multiplicity(sample_loop(closed, samples));
}

int degree_sum(const std::vector<ClosedOrbit>& orbits) {
  int sum = 0;
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    if (!orbits[i].degree)
      fail(ErrorKind::invariant, "degree_sum: orbit " + std::to_string(i) + " is degenerate; its degree is undefined");
    for (std::size_t j = 0; j < i; ++j)
      if (dedup_mod_s1(orbits[i], orbits[j]))
        fail(ErrorKind::invariant, "degree_sum: orbits " + std::to_string(j) + " and " + std::to_string(i) +
                                       " are the same geometric orbit");
    sum += *orbits[i].degree;
  }
  return sum;
}

}  // namespace magorbit
