#include "magorbit/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "magorbit/apriori_audit.hpp"
#include "magorbit/closed_orbits.hpp"
#include "magorbit/io.hpp"
#include "magorbit/poincare.hpp"
#include "magorbit/reduction.hpp"
#include "magorbit/variational.hpp"

namespace magorbit {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormatVersion = "magorbit-1";

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
Json opt_json(const std::optional<Vec3>& v) { return v ? to_json(*v) : Json(nullptr); }

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const Json::exception&) {
    fail(ErrorKind::config, std::string("manifest: key '") + key + "' has the wrong type");
  }
}

std::optional<double> get_opt(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) fail(ErrorKind::config, std::string("manifest: key '") + key + "' must be a number");
  return j[key].get<double>();
}

std::optional<Vec3> get_vec(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return vec3_from_json(j[key], std::string("manifest.") + key);
}

bool parse_number(const std::string& s, double& v) {
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

Json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::config, where + ": " + e.what());
  }
}

// A flag value that is inline JSON, a bare number, a keyword, or a file name.
Json spec_argument(const std::string& value, const std::string& flag) {
  double v = 0.0;
  if (parse_number(value, v)) return v;
  if (!value.empty() && (value.front() == '{' || value.front() == '[')) return parse_json_text(value, flag);
  if (value == "round") return Json{{"kind", "round"}};
  if (value == "height") return Json{{"kind", "zonal"}, {"coeffs", {0.0, 1.0}}};
  if (!fs::exists(value)) fail(ErrorKind::config, flag + ": '" + value + "' is not a number, JSON or an existing file");
  return read_json_file(value);
}

Vec3 vec_argument(const std::string& value, const std::string& flag) {
  std::vector<double> c;
  std::stringstream ss(value);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    double v = 0.0;
    if (!parse_number(cell, v)) fail(ErrorKind::config, flag + ": '" + cell + "' is not a number");
    c.push_back(v);
  }
  if (c.size() != 3) fail(ErrorKind::config, flag + ": expected three comma-separated numbers");
  return Vec3(c[0], c[1], c[2]);
}

ConformalMetric load_metric(const Json& spec) {
  try {
    return ConformalMetric::from_json(spec);
  } catch (const Error& e) {
    fail(e.kind(), std::string("--metric: ") + e.what());
  }
}

CurvatureFunction load_k(const Json& spec) {
  try {
    return CurvatureFunction::from_json(spec);
  } catch (const Error& e) {
    fail(e.kind(), std::string("--k: ") + e.what());
  }
}

CurvatureFunction target_k(const RunConfig& cfg) {
  if (!cfg.k.is_null()) return load_k(cfg.k);
  if (cfg.eps == 0.0) return CurvatureFunction::constant(cfg.k0);
  return CurvatureFunction::zonal({cfg.k0, cfg.eps});
}

class Output {
 public:
  Output(const RunConfig& cfg) : dir_(cfg.out), config_(cfg.to_json()), hash_(manifest_hash(config_)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::config, "--out: cannot create '" + dir_.string() + "': " + ec.message());
  }
  const std::string& hash() const { return hash_; }

  void json(const std::string& name, Json body) {
    body["manifest_hash"] = hash_;
    text(name, body.dump(2) + "\n");
  }
  void text(const std::string& name, const std::string& body) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) fail(ErrorKind::config, "cannot write '" + (dir_ / name).string() + "'");
    f << body;
    files_.push_back(name);
  }
  // Written last, and also when a run fails after producing partial outputs.
  void manifest(const Json& summary) {
    Json m{{"format", kFormatVersion},
           {"config", config_},
           {"manifest_hash", hash_},
           {"outputs", files_},
           {"summary", summary}};
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << m.dump(2) << "\n";
  }

 private:
  fs::path dir_;
  Json config_;
  std::string hash_;
  std::vector<std::string> files_;
};

ShootOptions shoot_options(const RunConfig& cfg) {
  ShootOptions opt;
  opt.tol = cfg.tol.value_or(1e-12);
  return opt;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const auto m = load_metric(cfg.metric);
  const auto k = target_k(cfg);
  PhaseState s0;
  if (cfg.x0 || cfg.v0) {
    if (!cfg.x0 || !cfg.v0) fail(ErrorKind::config, "--x0 and --v0 must be given together");
    s0 = make_state(*cfg.x0, *cfg.v0);
    if (!(g_speed(m, s0) > 0.0)) fail(ErrorKind::config, "--v0: zero tangential velocity");
  } else {
    s0 = with_g_speed(m, latitude_state(latitude_radius(cfg.k0), LatitudeFrame{}, 0.0), 1.0);
  }
  const double speed = g_speed(m, s0);
  const double T = cfg.time.value_or(period_guess(m, k, with_g_speed(m, s0, 1.0)) / speed);
  if (!(T > 0.0)) fail(ErrorKind::config, "--time: must be positive");
  if (cfg.samples < 1) fail(ErrorKind::config, "--samples: must be at least 1");

  IntegrateOptions io;
  io.tol = cfg.tol.value_or(1e-10);
  std::vector<double> times;
  for (int i = 0; i <= cfg.samples; ++i) times.push_back(T * i / cfg.samples);
  io.output_times = times;
  const Trajectory traj = integrate(m, k, s0, T, io);

  Output o(cfg);
  std::ostringstream csv;
  write_trajectory_csv(csv, m, traj, times, o.hash());
  o.text("trajectory.csv", csv.str());
  const PhaseState end = traj.final();
  const double closure = std::max((end.x - s0.x).norm(), (end.v - s0.v).norm());
  const Json summary{{"metric_id", m.id()},
                     {"k_id", k.id()},
                     {"tol", io.tol},
                     {"time", T},
                     {"speed_g", speed},
                     {"drift", traj.drift},
                     {"closure", closure},
                     {"rhs_evaluations", traj.rhs_evaluations}};
  o.manifest(summary);
  out << "simulate: T = " << format_double(T) << ", speed drift " << format_double(traj.drift) << ", closure "
      << format_double(closure) << "\n";
  return 0;
}

int cmd_find(const RunConfig& cfg, std::ostream& out) {
  const auto m = load_metric(cfg.metric);
  const auto k = target_k(cfg);
  if (cfg.seeds < 1) fail(ErrorKind::config, "--seeds: must be at least 1");
  const auto rep = multistart_search(m, k, cfg.seeds, cfg.rng, shoot_options(cfg));

  Output o(cfg);
  Json failures = Json::object();
  for (const auto& [kind, n] : rep.failures) failures[kind] = n;
  const Json stats{{"seeds", rep.seeds},
                   {"converged", rep.converged},
                   {"not_simple", rep.not_simple},
                   {"duplicates", rep.duplicates},
                   {"failures", failures},
                   {"orbit_count", rep.orbits.size()}};
  o.json("catalog.json", Json{{"orbits", orbit_catalog(rep.orbits)}, {"search", stats}});
  o.manifest(stats);
  out << "find: " << rep.orbits.size() << " orbit(s) from " << rep.seeds << " seeds\n";
  return 0;
}

std::vector<ClosedOrbit> reconverge(const ConformalMetric& m, const CurvatureFunction& k, const RunConfig& cfg) {
  if (cfg.catalog.is_null()) fail(ErrorKind::config, "--catalog: required for '" + cfg.command + "'");
  std::vector<ClosedOrbit> orbits;
  ShootOptions opt = shoot_options(cfg);
  opt.winding_fallback = true;
  for (const auto& e : read_catalog(cfg.catalog)) {
    ClosedOrbit o = shoot(m, k, e.initial, e.period, opt);
    o.provenance = e.provenance;
    orbits.push_back(std::move(o));
  }
  return orbits;
}

int cmd_index(const RunConfig& cfg, std::ostream& out) {
  const auto m = load_metric(cfg.metric);
  const auto k = target_k(cfg);
  const auto orbits = reconverge(m, k, cfg);

  Output o(cfg);
  Json list = Json::array();
  Json degrees = Json::array();
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    const auto& orb = orbits[i];
    const Monodromy M = monodromy(m, k, orb.trajectory, cfg.tol.value_or(1e-11));
    list.push_back(Json{{"orbit", i},
                        {"degree", orb.degree ? Json(*orb.degree) : Json(nullptr)},
                        {"index", orb.index ? to_json(*orb.index) : Json(nullptr)},
                        {"residual", orb.residual},
                        {"monodromy", monodromy_json(m, k, M)}});
    degrees.push_back(orb.degree ? Json(*orb.degree) : Json(nullptr));
  }
  Json body{{"orbits", list}, {"degrees", degrees}};
  // Written before the checks so a failing run still leaves its evidence behind.
  auto finish = [&](const Json& sum) {
    body["degree_sum"] = sum;
    o.json("index.json", body);
    o.manifest(Json{{"degrees", degrees}, {"degree_sum", sum}});
  };
  for (std::size_t i = 0; i < orbits.size(); ++i) {
    const auto& orb = orbits[i];
    if (orb.degree && orb.index && (*orb.degree != -orb.index->index || orb.index->index > 1)) {
      finish(nullptr);
      fail(ErrorKind::invariant, "degree = -index with index <= 1 fails for orbit " + std::to_string(i));
    }
  }
  int sum = 0;
  try {
    sum = degree_sum(orbits);
  } catch (const Error&) {
    finish(nullptr);
    throw;
  }
  finish(sum);
  out << "index: degrees " << degrees.dump() << ", sum " << sum << "\n";
  return 0;
}

int cmd_reduce(const RunConfig& cfg, std::ostream& out) {
  const CurvatureFunction k1 = cfg.k.is_null() ? CurvatureFunction::height() : load_k(cfg.k);
  const auto zeros = reduced_zeros(k1, cfg.k0);
  Json report = reduction_report(cfg.k0, k1.id(), zeros);
  if (cfg.eps != 0.0) {
    Json seeds = Json::array();
    for (const auto& z : zeros) {
      if (z.degenerate) continue;
      const auto s = seed_from_reduction(cfg.k0, k1, cfg.eps, z);
      seeds.push_back(Json{{"initial", to_json(s.state)}, {"period", s.period}});
    }
    report["eps"] = cfg.eps;
    report["seeds"] = seeds;
  }
  Output o(cfg);
  o.json("reduction.json", report);
  o.manifest(Json{{"zeros", zeros.size()}, {"predicted_orbit_degrees", report["predicted_orbit_degrees"]}});
  out << "reduce: " << zeros.size() << " zero(s), predicted degrees " << report["predicted_orbit_degrees"].dump()
      << "\n";
  return 0;
}

int cmd_audit(const RunConfig& cfg, std::ostream& out) {
  const auto m = load_metric(cfg.metric);
  const auto k = target_k(cfg);
  std::vector<ClosedOrbit> orbits;
  if (!cfg.catalog.is_null()) orbits = reconverge(m, k, cfg);
  const AuditReport rep = audit(m, k, orbits, cfg.inj);
  Output o(cfg);
  o.json("audit.json", to_json(rep));
  Json verdicts = Json::object();
  for (const auto* h : {&rep.hypotheses.injectivity, &rep.hypotheses.positive, &rep.hypotheses.pinched})
    verdicts[h->name] = to_string(h->verdict);
  o.manifest(Json{{"hypotheses", verdicts}, {"orbits", orbits.size()}});
  out << "audit: " << verdicts.dump() << "\n";
  return 0;
}

int cmd_continue(const RunConfig& cfg, std::ostream& out) {
  const auto m = load_metric(cfg.metric);
  const auto k = target_k(cfg);
  if (cfg.steps < 1) fail(ErrorKind::config, "--steps: must be at least 1");
  ContinuationOptions opt;
  opt.steps = cfg.steps;
  opt.shoot = shoot_options(cfg);
  const ContinuationLog log = homotopy_continuation(m, k, cfg.k0, opt);

  Output o(cfg);
  std::ostringstream csv;
  write_continuation_csv(csv, log, o.hash());
  o.text("continuation.csv", csv.str());
  Json sums = Json::array();
  for (const auto& [s, d] : log.degree_sums()) sums.push_back(Json::array({s, d}));
  const Json summary{{"terminated", log.terminated},
                     {"final_degree_sum", log.final_degree_sum ? Json(*log.final_degree_sum) : Json(nullptr)},
                     {"final_orbits", orbit_catalog(log.final_orbits)},
                     {"degree_sums", sums},
                     {"warnings", log.warnings}};
  o.json("continuation.json", summary);
  o.manifest(Json{{"terminated", log.terminated}, {"final_degree_sum", summary["final_degree_sum"]}});
  out << "continue: " << log.records.size() << " records, final degree sum "
      << summary["final_degree_sum"].dump() << ", terminated " << log.terminated << "\n";
  if (log.terminated > 0) fail(ErrorKind::no_convergence, "continuation: " + std::to_string(log.terminated) +
                                                              " branch(es) terminated before t = 1");
  return 0;
}

}  // namespace

Json RunConfig::to_json() const {
  return Json{{"command", command}, {"metric", metric}, {"k", k},
              {"k0", k0},           {"eps", eps},       {"seeds", seeds},
              {"rng", rng},         {"tol", opt_json(tol)}, {"steps", steps},
              {"x0", opt_json(x0)}, {"v0", opt_json(v0)},   {"time", opt_json(time)},
              {"samples", samples}, {"catalog", catalog}, {"inj", opt_json(inj)},
              {"format", kFormatVersion}};
}

RunConfig RunConfig::from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "manifest: 'config' must be an object");
  RunConfig c;
  c.command = get_or<std::string>(j, "command", "");
  if (j.contains("metric")) c.metric = j["metric"];
  if (j.contains("k")) c.k = j["k"];
  c.k0 = get_or(j, "k0", c.k0);
  c.eps = get_or(j, "eps", c.eps);
  c.seeds = get_or(j, "seeds", c.seeds);
  c.rng = get_or(j, "rng", c.rng);
  c.tol = get_opt(j, "tol");
  c.steps = get_or(j, "steps", c.steps);
  c.x0 = get_vec(j, "x0");
  c.v0 = get_vec(j, "v0");
  c.time = get_opt(j, "time");
  c.samples = get_or(j, "samples", c.samples);
  if (j.contains("catalog")) c.catalog = j["catalog"];
  c.inj = get_opt(j, "inj");
  return c;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::contract:
    case ErrorKind::config:
    case ErrorKind::domain:
    case ErrorKind::unsupported: return 1;
    case ErrorKind::invariant: return 2;
    default: return 3;
  }
}

int run_config(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.command == "simulate") return cmd_simulate(cfg, out);
    if (cfg.command == "find") return cmd_find(cfg, out);
    if (cfg.command == "index") return cmd_index(cfg, out);
    if (cfg.command == "reduce") return cmd_reduce(cfg, out);
    if (cfg.command == "audit") return cmd_audit(cfg, out);
    if (cfg.command == "continue") return cmd_continue(cfg, out);
    fail(ErrorKind::config, "unknown command '" + cfg.command + "'");
  } catch (const Error& e) {
    err << "magorbit " << cfg.command << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "magorbit " << cfg.command << ": internal error: " << e.what() << "\n";
    return 3;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed magnetic geodesics on the 2-sphere", "magorbit"};
  app.require_subcommand(1);

  std::string metric = "round", k, x0, v0, catalog, manifest;
  RunConfig cfg;
  double time = 0.0, inj = 0.0, tol = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--metric", metric, "metric: 'round', inline JSON or a JSON file");
    sub->add_option("--k", k, "curvature: number, inline JSON or a JSON file (default k0 + eps z)");
    sub->add_option("--k0", cfg.k0, "base curvature");
    sub->add_option("--eps", cfg.eps, "height perturbation size");
    sub->add_option("--tol", tol, "integrator tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out, "output directory");
  };
  auto* simulate = app.add_subcommand("simulate", "integrate one trajectory");
  common(simulate);
  simulate->add_option("--x0", x0, "start point x,y,z");
  simulate->add_option("--v0", v0, "start velocity x,y,z");
  simulate->add_option("--time", time, "duration (default one latitude period)");
  simulate->add_option("--samples", cfg.samples, "output intervals");

  auto* find = app.add_subcommand("find", "multistart search for closed simple orbits");
  common(find);
  find->add_option("--seeds", cfg.seeds, "seed count");
  find->add_option("--rng", cfg.rng, "seed rotation");

  auto* index = app.add_subcommand("index", "degrees and indices of catalog orbits");
  common(index);
  index->add_option("--catalog", catalog, "catalog.json from find")->required();

  auto* reduce = app.add_subcommand("reduce", "zeros of the reduced field (--k is the perturbation)");
  common(reduce);

  auto* auditc = app.add_subcommand("audit", "Gauss-Bonnet, length bound and hypothesis checks");
  common(auditc);
  auditc->add_option("--catalog", catalog, "catalog.json from find");
  auditc->add_option("--inj", inj, "injectivity radius lower bound")->check(CLI::PositiveNumber);

  auto* cont = app.add_subcommand("continue", "two-stage homotopy from the round sphere");
  common(cont);
  cont->add_option("--steps", cfg.steps, "initial 1/dt");

  auto* rerun = app.add_subcommand("rerun", "repeat the run recorded in a manifest");
  rerun->add_option("manifest", manifest, "manifest.json")->required();
  rerun->add_option("--out", cfg.out, "output directory");

  std::vector<const char*> argv{"magorbit"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const auto* sub = app.get_subcommands().front();
  auto given = [](const CLI::App* a, const char* name) {
    const auto* opt = a->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  try {
    if (sub == rerun) {
      const Json m = read_json_file(manifest);
      if (!m.is_object() || !m.contains("config")) fail(ErrorKind::config, manifest + ": missing key 'config'");
      const std::string dir = cfg.out;
      cfg = RunConfig::from_json(m["config"]);
      cfg.out = dir;
    } else {
      cfg.command = sub->get_name();
      cfg.metric = spec_argument(metric, "--metric");
      if (!k.empty()) cfg.k = spec_argument(k, "--k");
      if (given(sub, "--tol")) cfg.tol = tol;
      if (given(sub, "--x0")) cfg.x0 = vec_argument(x0, "--x0");
      if (given(sub, "--v0")) cfg.v0 = vec_argument(v0, "--v0");
      if (given(sub, "--time")) cfg.time = time;
      if (given(sub, "--inj")) cfg.inj = inj;
      if (!catalog.empty()) {
        cfg.catalog = Json::array();
        for (const auto& e : read_catalog(read_json_file(catalog)))
          cfg.catalog.push_back(Json{{"initial", to_json(e.initial)}, {"period", e.period}, {"provenance", e.provenance}});
      }
    }
  } catch (const Error& e) {
    err << "magorbit: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  }
  return run_config(cfg, out, err);
}

}  // namespace magorbit
