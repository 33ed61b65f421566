#include "magorbit/apriori_audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "magorbit/errors.hpp"

namespace magorbit {

namespace {

struct CurveSamples {
  std::vector<Vec3> x, v;
  double dt = 0.0;
  double spacing = 0.0;  // max chord between consecutive samples
};

CurveSamples sample_curve(const Trajectory& orbit, double period, int n, bool reverse) {
  require(n >= 16, "gauss_bonnet: too few curve samples");
  require(period > 0.0 && period <= orbit.duration() * (1 + 1e-12), "gauss_bonnet: period exceeds the trajectory");
  CurveSamples c;
  c.dt = period / n;
  c.x.resize(n);
  c.v.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = orbit.t0() + period * i / n;
    const PhaseState s = orbit.at(t);
    c.x[i] = s.x.normalized();
    c.v[i] = s.v;
  }
  if (reverse) {
    std::vector<Vec3> x(n), v(n);
    for (int i = 0; i < n; ++i) {
      x[i] = c.x[(n - i) % n];
      v[i] = -c.v[(n - i) % n];
    }
    c.x.swap(x);
    c.v.swap(v);
  }
  for (int i = 0; i < n; ++i) c.spacing = std::max(c.spacing, (c.x[(i + 1) % n] - c.x[i]).norm());
  return c;
}

// K dA_g = (1 - lap0 u) dA_0 on the unit sphere.
double curvature_density(const ConformalMetric& m, const Vec3& x) { return 1.0 - m.lap0_u(x); }

// Edge-midpoint rule on a spherical cell, weighted by the exact round area.
template <class F>
double cell_rule(const F& f, const Vec3& a, const Vec3& b, const Vec3& c) {
  return (f((a + b).normalized()) + f((b + c).normalized()) + f((c + a).normalized())) / 3.0;
}

// Stereographic image from a fixed pole, so the winding number about any node p counts
// [p on the left] - [pole on the left].
class PoleProjection {
 public:
  PoleProjection(const std::vector<Vec3>& loop, const Vec3& pole) : center_(-pole) {
    tangent_basis(center_, e1_, e2_);
    for (const auto& x : loop) q_.push_back(project(x));
    // Horizontal slabs so a query only visits edges that can cross its ray.
    ymin_ = ymax_ = q_.front().y();
    for (const auto& q : q_) {
      ymin_ = std::min(ymin_, q.y());
      ymax_ = std::max(ymax_, q.y());
    }
    const int n = static_cast<int>(q_.size());
    slabs_.resize(std::max(1, n / 8));
    for (int i = 0; i < n; ++i) {
      const double lo = std::min(q_[i].y(), q_[(i + 1) % n].y()), hi = std::max(q_[i].y(), q_[(i + 1) % n].y());
      for (int j = slab(lo); j <= slab(hi); ++j) slabs_[j].push_back(i);
    }
  }

  Eigen::Vector2d project(const Vec3& x) const {
    return Eigen::Vector2d(x.dot(e1_), x.dot(e2_)) / std::max(1.0 + x.dot(center_), 1e-300);
  }

  int winding(const Vec3& p) const {
    const Eigen::Vector2d o = project(p);
    if (o.y() < ymin_ || o.y() > ymax_) return 0;
    const int n = static_cast<int>(q_.size());
    int wn = 0;
    for (int i : slabs_[slab(o.y())]) {
      const Eigen::Vector2d a = q_[i] - o, b = q_[(i + 1) % n] - o;
      const double left = a.x() * b.y() - b.x() * a.y();
      if (a.y() <= 0.0) {
        if (b.y() > 0.0 && left > 0.0) ++wn;
      } else if (b.y() <= 0.0 && left < 0.0) {
        --wn;
      }
    }
    return wn;
  }

 private:
  int slab(double y) const {
    const int m = static_cast<int>(slabs_.size());
    const double span = ymax_ - ymin_;
    const int j = span > 0.0 ? static_cast<int>((y - ymin_) / span * m) : 0;
    return std::clamp(j, 0, m - 1);
  }

  Vec3 center_, e1_, e2_;
  std::vector<Eigen::Vector2d> q_;
  double ymin_ = 0.0, ymax_ = 0.0;
  std::vector<std::vector<int>> slabs_;
};

struct QuadratureSums {
  double interior = 0.0, interior_area = 0.0, exterior_area = 0.0, error = 0.0;
  int skipped = 0;
};

class RegionQuadrature {
 public:
  RegionQuadrature(const ConformalMetric& m, const CurveSamples& c, const GaussBonnetOptions& opt)
      : m_(m), c_(c), opt_(opt), proj_(c.x, choose_pole(c)) {
    // Side of the pole from a point just left of the curve.
    const Vec3 normal = c.x[0].cross(c.v[0]).normalized();
    const Vec3 probe = (c.x[0] + 1e-4 * normal).normalized();
    pole_left_ = 1 - proj_.winding(probe);
    if (pole_left_ != 0 && pole_left_ != 1)
      fail(ErrorKind::degenerate, "gauss_bonnet: curve does not bound a region (winding " +
                                      std::to_string(1 - pole_left_) + ")");
  }

  void cell(const Vec3& a, const Vec3& b, const Vec3& c, int depth, const std::vector<int>& candidates) {
    const Vec3 n = (a + b + c).normalized();
    const double R = std::max({(n - a).norm(), (n - b).norm(), (n - c).norm()});
    double dist = std::numeric_limits<double>::infinity();
    std::vector<int> near;
    for (int i : candidates) {
      const double d = (c_.x[i] - n).norm();
      dist = std::min(dist, d);
      if (d <= 2 * R + c_.spacing) near.push_back(i);
    }
    const bool cut = dist <= R + c_.spacing;
    if (cut && depth < opt_.refine_depth) {
      const Vec3 ab = (a + b).normalized(), bc = (b + c).normalized(), ca = (c + a).normalized();
      cell(a, ab, ca, depth + 1, near);
      cell(ab, b, bc, depth + 1, near);
      cell(ca, bc, c, depth + 1, near);
      cell(ab, bc, ca, depth + 1, near);
      return;
    }
    const double area = spherical_triangle_area(a, b, c);
    const double f = cell_rule([this](const Vec3& x) { return curvature_density(m_, x); }, a, b, c);
    if (cut) sums.error += area * std::abs(f);
    if (dist < opt_.skip_distance) {
      ++sums.skipped;
      return;
    }
    const double g_area = area * cell_rule([this](const Vec3& x) { return m_.factor(x); }, a, b, c);
    if (pole_left_ + proj_.winding(n) == 1) {
      sums.interior += area * f;
      sums.interior_area += g_area;
    } else {
      sums.exterior_area += g_area;
    }
  }

  QuadratureSums sums;

 private:
  static Vec3 choose_pole(const CurveSamples& c) {
    Vec3 best = kE3;
    double best_d = -1.0;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    const int n = 64;
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / n, rho = std::sqrt(1.0 - z * z);
      const Vec3 p(rho * std::cos(golden * i), rho * std::sin(golden * i), z);
      double d = std::numeric_limits<double>::infinity();
      for (const auto& x : c.x) d = std::min(d, (x - p).norm());
      if (d > best_d) {
        best_d = d;
        best = p;
      }
    }
    return best;
  }

  const ConformalMetric& m_;
  const CurveSamples& c_;
  const GaussBonnetOptions& opt_;
  PoleProjection proj_;
  int pole_left_ = 0;
};

struct BoundaryIntegral {
  double value = 0.0;
  int winding = 0;
};

// Round area of the left region via the polar-angle form (1 - cos theta) dphi about an axis
// the curve winds around once, minus the flux of grad0 u through the curve.
BoundaryIntegral boundary_curvature(const ConformalMetric& m, const CurveSamples& c) {
  const int n = static_cast<int>(c.x.size());
  Vec3 mean = Vec3::Zero();
  for (const auto& x : c.x) mean += x;
  std::vector<Vec3> axes;
  if (mean.norm() > 1e-3 * n) axes.push_back(mean.normalized());
  for (const Vec3& e : {kE3, kE1, kE2, Vec3(Vec3(1, 1, 1).normalized()), Vec3(Vec3(1, -1, 1).normalized())}) {
    axes.push_back(e);
    axes.push_back(-e);
  }
  for (const Vec3& a : axes) {
    double closest = 1.0;
    for (const auto& x : c.x) closest = std::min(closest, 1.0 - std::abs(x.dot(a)));
    if (closest < 1e-3) continue;
    Vec3 b1, b2;
    tangent_basis(a, b1, b2);
    double turn = 0.0, cap = 0.0;
    for (int i = 0; i < n; ++i) {
      const double X = c.x[i].dot(b1), Y = c.x[i].dot(b2);
      const double dphi = (X * c.v[i].dot(b2) - Y * c.v[i].dot(b1)) / (X * X + Y * Y);
      turn += dphi * c.dt;
      cap += (1.0 - c.x[i].dot(a)) * dphi * c.dt;
    }
    const double w = turn / (2 * M_PI);
    const long wr = std::lround(w);
    if (std::abs(wr) != 1 || std::abs(w - wr) > 1e-6) continue;
    double flux = 0.0;
    for (int i = 0; i < n; ++i) flux += m.grad0_u(c.x[i]).dot(-c.x[i].cross(c.v[i])) * c.dt;
    const double area0 = wr == 1 ? cap : 4 * M_PI + cap;
    return {area0 - flux, static_cast<int>(wr)};
  }
  fail(ErrorKind::degenerate, "gauss_bonnet: no axis with winding number +-1 (curve is not a simple loop?)");
}

}  // namespace

int spherical_winding(const std::vector<Vec3>& loop, const Vec3& p) {
  return PoleProjection(loop, -p).winding(p);
}

GaussBonnetResult gauss_bonnet(const ConformalMetric& m, const CurvatureFunction& k, const Trajectory& orbit,
                               double period, const GaussBonnetOptions& opt) {
  require(opt.level >= 0 && opt.refine_depth >= 0, "gauss_bonnet: negative level");
  const CurveSamples c = sample_curve(orbit, period, opt.curve_samples, opt.reverse);
  GaussBonnetResult r;
  const double sign = opt.reverse ? -1.0 : 1.0;
  for (std::size_t i = 0; i < c.x.size(); ++i) r.line_integral += sign * k(c.x[i]) * g_speed(m, c.x[i], c.v[i]) * c.dt;

  const BoundaryIntegral b = boundary_curvature(m, c);
  r.boundary_curvature = b.value;
  r.winding = b.winding;

  const Quadrature q = icosahedral_quadrature(opt.level);
  RegionQuadrature rq(m, c, opt);
  std::vector<int> all(c.x.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  for (const auto& t : q.triangles) rq.cell(q.vertices[t[0]], q.vertices[t[1]], q.vertices[t[2]], 0, all);
  r.quadrature_curvature = rq.sums.interior;
  r.interior_area = rq.sums.interior_area;
  r.exterior_area = rq.sums.exterior_area;
  r.error_bound = rq.sums.error;
  r.skipped_nodes = rq.sums.skipped;
  for (const auto& t : q.triangles) {
    const Vec3 &a = q.vertices[t[0]], &b = q.vertices[t[1]], &c3 = q.vertices[t[2]];
    r.volume += spherical_triangle_area(a, b, c3) * cell_rule([&m](const Vec3& x) { return m.factor(x); }, a, b, c3);
  }

  r.interior_curvature = opt.method == InteriorMethod::quadrature ? r.quadrature_curvature : r.boundary_curvature;
  r.residual = std::abs(r.line_integral + r.interior_curvature - 2 * M_PI);
  return r;
}

double gauss_bonnet_residual(const ConformalMetric& m, const CurvatureFunction& k, const ClosedOrbit& orbit,
                             const GaussBonnetOptions& opt) {
  require(orbit.simple && !orbit.simple_inconclusive, "gauss_bonnet: orbit is not certified simple");
  return gauss_bonnet(m, k, orbit.trajectory, orbit.period, opt).residual;
}

AuditExtremes audit_extremes(const ConformalMetric& m, const CurvatureFunction& k, int level) {
  AuditExtremes e;
  e.k = field_extremes([&k](const Vec3& x) { return k(x); }, level);
  e.K = field_extremes([&m](const Vec3& x) { return gauss_curvature(m, x); }, level);
  e.inf_k = e.k.inf;
  e.sup_K = e.K.sup;
  e.inf_K = e.K.inf;
  e.sup_K_minus = std::max(0.0, -e.K.inf);
  e.volume = volume(m, quadrature(m, level));
  if (e.K.inf - e.K.margin > 0.0) e.inj_lower = M_PI / std::sqrt(e.K.sup);
  e.heuristic = e.k.heuristic || e.K.heuristic;
  return e;
}

double g_length(const ConformalMetric& m, const Trajectory& orbit, double period, int samples) {
  const CurveSamples c = sample_curve(orbit, period, samples, false);
  double L = 0.0;
  for (std::size_t i = 0; i < c.x.size(); ++i) L += g_speed(m, c.x[i], c.v[i]) * c.dt;
  return L;
}

double length_upper_bound(const AuditExtremes& ex) {
  const double inf_k = ex.inf_k - ex.k.margin;
  if (inf_k <= 0.0) return std::numeric_limits<double>::infinity();
  const double sup_minus = ex.sup_K_minus > 0.0 ? ex.sup_K_minus + ex.K.margin : 0.0;
  return (2 * M_PI + sup_minus * ex.volume) / inf_k;
}

LengthBound length_bound_check(const ConformalMetric& m, const CurvatureFunction&, const ClosedOrbit& orbit,
                               const AuditExtremes& ex) {
  LengthBound b;
  b.length = g_length(m, orbit.trajectory, orbit.period);
  b.upper = length_upper_bound(ex);
  b.slack = b.upper - b.length;
  b.holds = b.length <= b.upper;
  return b;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::failed: return "failed";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "?";
}

bool HypothesisReport::any_satisfied() const {
  return injectivity.verdict == Verdict::satisfied || positive.verdict == Verdict::satisfied ||
         pinched.verdict == Verdict::satisfied;
}

namespace {

Verdict judge(double slack, double margin) {
  if (slack > margin) return Verdict::satisfied;
  if (slack < -margin) return Verdict::failed;
  return Verdict::indeterminate;
}

}  // namespace

HypothesisReport hypothesis_check(const AuditExtremes& ex, std::optional<double> inj) {
  HypothesisReport h;
  const double mk = ex.k.margin, mK = ex.K.margin;
  const double budget = 2 * M_PI + ex.sup_K_minus * ex.volume;

  h.injectivity.name = "cond_inj";
  const std::optional<double> radius = inj ? inj : ex.inj_lower;
  if (!radius) {
    h.injectivity.verdict = Verdict::indeterminate;
    h.injectivity.slack = std::numeric_limits<double>::quiet_NaN();
    h.injectivity.note = "K <= 0 somewhere and no injectivity radius supplied";
  } else {
    h.injectivity.slack = 4 * ex.inf_k - budget / *radius;
    h.injectivity.margin = 4 * mk + ex.volume * mK / *radius;
    if (!inj) {
      h.injectivity.conservative = true;
      h.injectivity.margin += budget * mK / (2 * M_PI * std::sqrt(ex.sup_K));
      h.injectivity.note = "inj replaced by the lower bound pi / sqrt(sup K)";
    }
    h.injectivity.verdict = judge(h.injectivity.slack, h.injectivity.margin);
  }

  h.positive.name = "cond_K_pos";
  if (ex.inf_K - mK <= 0.0) {
    h.positive.slack = ex.inf_K;
    h.positive.margin = mK;
    h.positive.verdict = ex.inf_K + mK < 0.0 ? Verdict::failed : Verdict::indeterminate;
    h.positive.note = "K is not bounded away from 0";
  } else {
    h.positive.slack = 2 * ex.inf_k - std::sqrt(ex.sup_K);
    h.positive.margin = 2 * mk + mK / (2 * std::sqrt(ex.sup_K));
    h.positive.verdict = judge(h.positive.slack, h.positive.margin);
  }

  h.pinched.name = "cond_K_pinch";
  h.pinched.slack = 4 * ex.inf_K - ex.sup_K;
  h.pinched.margin = 5 * mK;
  h.pinched.verdict = judge(h.pinched.slack, h.pinched.margin);
  return h;
}

HypothesisReport hypothesis_check(const ConformalMetric& m, const CurvatureFunction& k, std::optional<double> inj) {
  return hypothesis_check(audit_extremes(m, k), inj);
}

AuditReport audit(const ConformalMetric& m, const CurvatureFunction& k, const std::vector<ClosedOrbit>& orbits,
                  std::optional<double> inj, const GaussBonnetOptions& gb) {
  AuditReport r;
  r.extremes = audit_extremes(m, k);
  r.hypotheses = hypothesis_check(r.extremes, inj);
  r.min_length = orbits.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (const auto& o : orbits) {
    OrbitAudit a;
    a.gauss_bonnet = gauss_bonnet(m, k, o.trajectory, o.period, gb);
    a.gb_residual = a.gauss_bonnet.residual;
    a.length = length_bound_check(m, k, o, r.extremes);
    r.min_length = std::min(r.min_length, a.length.length);
    r.orbits.push_back(a);
  }
  r.length_upper = length_upper_bound(r.extremes);
  if (orbits.empty()) {
    r.degree_note = "no orbits audited";
    return r;
  }
  try {
    r.degree_sum = degree_sum(orbits);
  } catch (const Error& e) {
    r.degree_note = e.what();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Homotopy

ConformalMetric interpolated_metric(const ConformalMetric& target, double t) {
  require(t >= 0.0 && t <= 1.0, "interpolated_metric: t outside [0, 1]");
  auto F = [target, t](const Vec3& x) { return (1.0 - t) + t * target.factor(x); };
  auto u = [F](const Vec3& x) { return 0.5 * std::log(F(x)); };
  auto grad = [target, t, F](const Vec3& x) -> Vec3 { return t * target.factor(x) / F(x) * target.grad0_u(x); };
  auto lap = [target, t, F](const Vec3& x) {
    const double f = F(x);
    const Vec3 g = target.grad0_u(x);
    return t * target.factor(x) / f * (target.lap0_u(x) + 2.0 * (1.0 - t) * g.squaredNorm() / f);
  };
  Json spec = {{"type", "interpolated"}, {"t", t}, {"target", target.spec()}};
  return ConformalMetric("interp(" + std::to_string(t) + "," + target.id() + ")", u, grad, lap, spec,
                         t == 0.0 || target.is_round());
}

NormalPerturbation metric_perturbation(const ConformalMetric& target, double k0) {
  return [target, k0](const Vec3& x, const Vec3& normal) {
    const double f = target.factor(x);
    return k0 * 0.5 * (f - 1.0) + f * target.grad0_u(x).dot(normal);
  };
}

std::vector<std::pair<double, int>> ContinuationLog::degree_sums() const {
  // Global parameter s = stage - 1 + t; each branch holds its last recorded degree.
  std::map<int, std::vector<std::pair<double, std::optional<int>>>> by_branch;
  std::vector<double> grid;
  for (const auto& r : records) {
    const double s = r.stage - 1 + r.t;
    by_branch[r.branch].push_back({s, r.degree});
    grid.push_back(s);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<std::pair<double, int>> out;
  for (double s : grid) {
    int sum = 0;
    for (const auto& [id, recs] : by_branch) {
      std::optional<int> d;
      bool started = false;
      for (const auto& [rs, rd] : recs)
        if (rs <= s) {
          d = rd;
          started = true;
        }
      if (started && d) sum += *d;
    }
    out.push_back({s, sum});
  }
  return out;
}

namespace {

struct Stage {
  int index;
  bool identity;
  std::function<ConformalMetric(double)> metric;
  std::function<CurvatureFunction(double)> curvature;
};

bool metric_is_round(const ConformalMetric& m) {
  if (m.is_round()) return true;
  for (const auto& x : icosahedral_quadrature(3).vertices)
    if (std::abs(m.u(x)) > 1e-15 || m.grad0_u(x).norm() > 1e-15) return false;
  return true;
}

bool curvature_is_constant(const CurvatureFunction& k, double k0) {
  for (const auto& x : icosahedral_quadrature(3).vertices)
    if (std::abs(k(x) - k0) > 1e-15) return false;
  return true;
}

struct Branch {
  int id = 0;
  bool alive = true;
  ClosedOrbit orbit;
  double t = 0.0;
  std::optional<Eigen::Vector4d> tangent;
};

ContinuationRecord make_record(int stage, int branch, double t, const ClosedOrbit& o, const std::string& note) {
  ContinuationRecord r;
  r.stage = stage;
  r.t = t;
  r.branch = branch;
  r.residual = o.residual;
  r.degree = o.degree;
  r.period = o.period;
  r.dP = o.dP;
  r.state = o.initial;
  r.note = note;
  return r;
}

class Continuation {
 public:
  Continuation(const Stage& stage, const ContinuationOptions& opt) : st_(stage), opt_(opt) {}

  Eigen::Vector4d residual(const Section& sec, const Eigen::Vector4d& y) const {
    const auto m = st_.metric(y[3]);
    const auto k = st_.curvature(y[3]);
    return shooting_residual(m, k, sec, y.head<3>(), opt_.shoot, false).residual;
  }

  // Residual and its 4 x 4 Jacobian in (z1, z2, T, t).
  std::pair<Eigen::Vector4d, Eigen::Matrix4d> linearize(const Section& sec, const Eigen::Vector4d& y) const {
    const auto m = st_.metric(y[3]);
    const auto k = st_.curvature(y[3]);
    const auto e = shooting_residual(m, k, sec, y.head<3>(), opt_.shoot, true);
    Eigen::Matrix4d J;
    J.leftCols<3>() = e.jacobian;
    const double h = 1e-6;
    Eigen::Vector4d yp = y, ym = y;
    yp[3] = std::min(1.0, y[3] + h);
    ym[3] = std::max(0.0, y[3] - h);
    J.col(3) = (residual(sec, yp) - residual(sec, ym)) / (yp[3] - ym[3]);
    return {e.residual, J};
  }

  static Eigen::Vector4d null_direction(const Eigen::Matrix4d& J) {
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(J, Eigen::ComputeFullV);
    return svd.matrixV().col(3);
  }

  // One predictor-corrector step. Returns the new branch state or nothing on corrector failure.
  std::optional<Branch> step(const Branch& b, double dt, bool& fold) const {
    const auto m = st_.metric(b.t);
    const Section sec(m, b.orbit.initial, 0.0, opt_.shoot.kind, b.orbit.period);
    const Eigen::Vector4d y0(0.0, 0.0, b.orbit.period, b.t);
    const auto [r0, J0] = linearize(sec, y0);
    Eigen::Vector4d tau = null_direction(J0);
    if (b.tangent ? tau.dot(*b.tangent) < 0.0 : tau[3] < 0.0) tau = -tau;
    fold = b.tangent && ((*b.tangent)[3] > 0.0) != (tau[3] > 0.0);
    const double ds = dt / std::max(std::abs(tau[3]), 0.1);
    const bool last = b.t + ds * tau[3] >= 1.0 - 0.25 * dt;
    const double reach = last ? (1.0 - b.t) / tau[3] : ds;
    const Eigen::Vector4d pred = y0 + reach * tau;
    Eigen::Vector4d y = pred;
    for (int it = 0; it < opt_.max_corrector; ++it) {
      if (!(y[3] >= 0.0 && y[3] <= 1.0 && y[2] > 0.0)) return std::nullopt;
      const auto [r, J] = linearize(sec, y);
      Eigen::Matrix<double, 5, 4> A;
      Eigen::Matrix<double, 5, 1> G;
      A.topRows<4>() = J;
      G.head<4>() = r;
      if (last) {
        A.row(4) << 0.0, 0.0, 0.0, 1.0;
        G[4] = y[3] - 1.0;
      } else {
        A.row(4) = tau.transpose();
        G[4] = tau.dot(y - pred);
      }
      if (r.norm() <= opt_.shoot.target && std::abs(G[4]) <= 1e-12) {
        Branch nb = b;
        nb.t = last ? 1.0 : y[3];
        const auto mt = st_.metric(nb.t);
        const auto kt = st_.curvature(nb.t);
        try {
          nb.orbit = shoot(mt, kt, sec.point(mt, y.head<2>()), y[2], opt_.shoot);
        } catch (const Error&) {
          return std::nullopt;
        }
        nb.tangent = tau;
        return nb;
      }
      Eigen::Vector4d dy = A.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(-G);
      if (!dy.allFinite()) return std::nullopt;
      const double cap = 0.25;
      if (dy.head<2>().norm() > cap) dy *= cap / dy.head<2>().norm();
      y += dy;
    }
    return std::nullopt;
  }

 private:
  const Stage& st_;
  const ContinuationOptions& opt_;
};

void check_hypotheses(const Stage& st, double t, ContinuationLog& log, std::map<double, bool>& seen) {
  if (seen.count(st.index - 1 + t)) return;
  seen[st.index - 1 + t] = true;
  const auto h = hypothesis_check(st.metric(t), st.curvature(t));
  if (!h.any_satisfied())
    log.warnings.push_back("no hypothesis verdict satisfied at stage " + std::to_string(st.index) +
                           ", t = " + std::to_string(t));
}

}  // namespace

ContinuationLog homotopy_continuation(const ConformalMetric& u_target, const CurvatureFunction& k_target, double k0,
                                      const ContinuationOptions& options) {
  ContinuationOptions opt = options;
  opt.shoot.winding_fallback = opt.shoot.winding_fallback || opt.index_fallback;
  require(opt.steps >= 1, "homotopy: steps must be >= 1");
  require(opt.max_halvings >= 0, "homotopy: max_halvings must be >= 0");
  const double r = k_to_r(k0);
  const auto k_start = CurvatureFunction::constant(k0);
  const std::vector<Stage> stages = {
      {1, metric_is_round(u_target), [u_target](double t) { return interpolated_metric(u_target, t); },
       [k_start](double) { return k_start; }},
      {2, curvature_is_constant(k_target, k0), [u_target](double) { return u_target; },
       [k_start, k_target](double t) { return CurvatureFunction::combine(1.0 - t, k_start, t, k_target); }},
  };

  ContinuationLog log;
  std::map<double, bool> hyp_seen;
  const auto first = std::find_if(stages.begin(), stages.end(), [](const Stage& s) { return !s.identity; });

  if (first == stages.end()) {
    // Nothing moves: the latitude family itself, represented by the circles about +-e3.
    const auto m = ConformalMetric::round();
    for (int b = 0; b < 2; ++b) {
      const auto fam = LatitudeFamily::from_axis(k0, b == 0 ? kE3 : Vec3(-kE3));
      for (const auto& st : stages)
        for (double t : {0.0, 1.0}) {
          ContinuationRecord rec;
          rec.stage = st.index;
          rec.t = t;
          rec.branch = b;
          rec.state = with_g_speed(m, family_point(fam, 0.0), 1.0);
          rec.period = 2 * M_PI * r;
          rec.note = "identity";
          log.records.push_back(rec);
        }
    }
    log.warnings.push_back("identity homotopy: the start family is degenerate, no degree census");
    return log;
  }

  // Seeds: nondegenerate zeros of the reduced field of the first moving stage.
  const NormalPerturbation p =
      first->index == 1 ? metric_perturbation(u_target, k0)
                        : NormalPerturbation([k_target, k0](const Vec3& x, const Vec3&) { return k_target(x) - k0; });
  const auto zeros = reduced_zeros(p, k0);
  std::vector<Branch> branches;
  const auto round = ConformalMetric::round();
  int skipped = 0;
  for (const auto& z : zeros) {
    if (z.degenerate) {
      ++skipped;
      continue;
    }
    Branch b;
    b.id = static_cast<int>(branches.size());
    const auto seed = seed_from_zero(k0, z);
    b.orbit.initial = with_g_speed(round, seed.state, 1.0);
    b.orbit.period = 2 * M_PI * r;
    b.orbit.degree = seed.predicted_degree;
    ContinuationRecord rec = make_record(first->index, b.id, 0.0, b.orbit, "reduced");
    log.records.push_back(rec);
    branches.push_back(b);
  }
  if (skipped > 0)
    log.warnings.push_back(std::to_string(skipped) +
                           " degenerate reduced zeros (a symmetric family) are not continued");
  if (branches.empty()) fail(ErrorKind::degenerate, "homotopy: no nondegenerate reduced zero to continue");
  if (opt.check_hypotheses) check_hypotheses(*first, 0.0, log, hyp_seen);

  // Leave the degenerate start: plain shooting at the first step, growing t until nondegenerate.
  for (auto& b : branches) {
    bool done = false;
    for (double t1 = 1.0 / opt.steps; t1 <= 0.5 + 1e-12 && !done; t1 *= 2) {
      const auto m = first->metric(t1);
      const auto k = first->curvature(t1);
      try {
        ClosedOrbit o = shoot(m, k, b.orbit.initial, b.orbit.period, opt.shoot);
        if (!o.degree) continue;
        b.orbit = o;
        b.t = t1;
        done = true;
      } catch (const Error&) {
      }
    }
    if (!done) {
      b.alive = false;
      ++log.terminated;
      ContinuationRecord rec = make_record(first->index, b.id, 0.0, b.orbit, "terminated");
      log.records.push_back(rec);
      continue;
    }
    if (*b.orbit.degree != *log.records[b.id].degree)
      fail(ErrorKind::invariant, "homotopy: branch " + std::to_string(b.id) + " leaves the family with degree " +
                                     std::to_string(*b.orbit.degree) + ", the reduction predicts " +
                                     std::to_string(*log.records[b.id].degree));
    log.records.push_back(make_record(first->index, b.id, b.t, b.orbit, "step"));
    if (opt.check_hypotheses) check_hypotheses(*first, b.t, log, hyp_seen);
  }

  for (auto st = first; st != stages.end(); ++st) {
    if (st != first) {
      for (auto& b : branches) {
        b.t = 0.0;
        b.tangent.reset();
        if (b.alive) log.records.push_back(make_record(st->index, b.id, 0.0, b.orbit, st->identity ? "identity" : "step"));
      }
    }
    if (st->identity) {
      for (auto& b : branches)
        if (b.alive) log.records.push_back(make_record(st->index, b.id, 1.0, b.orbit, "identity"));
      continue;
    }
    const Continuation cont(*st, opt);
    for (auto& b : branches) {
      if (!b.alive) continue;
      double dt = 1.0 / opt.steps;
      int halvings = 0;
      int guard = 0;
      while (b.t < 1.0 && b.alive) {
        if (++guard > 40 * opt.steps) {
          b.alive = false;
          ++log.terminated;
          log.records.push_back(make_record(st->index, b.id, b.t, b.orbit, "terminated"));
          break;
        }
        bool fold = false;
        const auto next = cont.step(b, dt, fold);
        if (!next) {
          if (++halvings > opt.max_halvings) {
            b.alive = false;
            ++log.terminated;
            log.records.push_back(make_record(st->index, b.id, b.t, b.orbit, "terminated"));
            break;
          }
          dt *= 0.5;
          continue;
        }
        halvings = 0;
        const std::optional<int> before = b.orbit.degree;
        b = *next;
        if (before && b.orbit.degree && *before != *b.orbit.degree && !fold)
          fail(ErrorKind::invariant, "homotopy: degree of branch " + std::to_string(b.id) + " changed from " +
                                         std::to_string(*before) + " to " + std::to_string(*b.orbit.degree) +
                                         " at t = " + std::to_string(b.t) + " without a fold");
        log.records.push_back(make_record(st->index, b.id, b.t, b.orbit, fold ? "fold" : "step"));
        if (opt.check_hypotheses) check_hypotheses(*st, b.t, log, hyp_seen);
        dt = std::min(2 * dt, 1.0 / opt.steps);
      }
    }
  }

  for (const auto& b : branches)
    if (b.alive) log.final_orbits.push_back(b.orbit);
  try {
    log.final_degree_sum = degree_sum(log.final_orbits);
  } catch (const Error& e) {
    log.warnings.push_back(std::string("final census: ") + e.what());
  }
  return log;
}

}  // namespace magorbit
