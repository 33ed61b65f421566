#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "magorbit/apriori_audit.hpp"
#include "magorbit/cli.hpp"
#include "magorbit/closed_orbits.hpp"
#include "magorbit/io.hpp"
#include "magorbit/loop_field.hpp"
#include "magorbit/reduction.hpp"
#include "magorbit/variational.hpp"

namespace py = pybind11;
using namespace magorbit;

namespace {

py::object to_python(const Json& j) {
  switch (j.type()) {
    case Json::value_t::null: return py::none();
    case Json::value_t::boolean: return py::bool_(j.get<bool>());
    case Json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case Json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case Json::value_t::number_float: return py::float_(j.get<double>());
    case Json::value_t::string: return py::str(j.get<std::string>());
    case Json::value_t::array: {
      py::list l;
      for (const auto& v : j) l.append(to_python(v));
      return std::move(l);
    }
    case Json::value_t::object: {
      py::dict d;
      for (const auto& [key, v] : j.items()) d[py::str(key)] = to_python(v);
      return std::move(d);
    }
    default: return py::none();
  }
}

PhaseState state(const Vec3& x, const Vec3& v) { return make_state(x, v); }

py::dict trajectory_dict(const ConformalMetric& m, const Trajectory& tr, const std::vector<double>& times) {
  const auto n = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd x(n, 3), v(n, 3);
  Eigen::VectorXd speed(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PhaseState s = tr.at(times[i]);
    x.row(i) = s.x.transpose();
    v.row(i) = s.v.transpose();
    speed[i] = g_speed(m, s);
  }
  py::dict d;
  d["t"] = times;
  d["x"] = x;
  d["v"] = v;
  d["speed_g"] = speed;
  d["drift"] = tr.drift;
  d["rhs_evaluations"] = tr.rhs_evaluations;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Closed magnetic geodesics on the 2-sphere";

  static py::exception<Error> error(mod, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::handle(error.ptr())(e.what());
      inst.attr("kind") = to_string(e.kind());
      PyErr_SetObject(error.ptr(), inst.ptr());
    }
  });

  py::class_<ConformalMetric>(mod, "Metric")
      .def_static("round", &ConformalMetric::round)
      .def_static("zonal", &ConformalMetric::zonal, py::arg("coeffs"))
      .def_static("from_json", [](const std::string& s) { return ConformalMetric::from_json(Json::parse(s)); })
      .def("u", &ConformalMetric::u)
      .def("gauss_curvature", [](const ConformalMetric& m, const Vec3& x) { return gauss_curvature(m, Vec3(x.normalized())); })
      .def_property_readonly("id", &ConformalMetric::id)
      .def("__repr__", [](const ConformalMetric& m) { return "Metric(" + m.id() + ")"; });

  py::class_<CurvatureFunction>(mod, "Curvature")
      .def_static("constant", &CurvatureFunction::constant)
      .def_static("zonal", &CurvatureFunction::zonal, py::arg("coeffs"))
      .def_static("height", &CurvatureFunction::height)
      .def_static("linear", &CurvatureFunction::linear, py::arg("c0"), py::arg("a"))
      .def_static("from_json", [](const std::string& s) { return CurvatureFunction::from_json(Json::parse(s)); })
      .def("__call__", [](const CurvatureFunction& k, const Vec3& x) { return k(x.normalized()); })
      .def_property_readonly("id", &CurvatureFunction::id)
      .def("__repr__", [](const CurvatureFunction& k) { return "Curvature(" + k.id() + ")"; });

  mod.def("latitude_radius", &latitude_radius, py::arg("k0"));
  mod.def("latitude_state",
          [](double k0) {
            const auto s = latitude_state(latitude_radius(k0), LatitudeFrame{}, 0.0);
            return std::pair{s.x, s.v};
          },
          py::arg("k0"), "Start of the period-1 latitude circle about e3 with curvature k0.");

  mod.def(
      "integrate",
      [](const ConformalMetric& m, const CurvatureFunction& k, const Vec3& x0, const Vec3& v0, double T, int samples,
         double tol) {
        IntegrateOptions io;
        io.tol = tol;
        for (int i = 0; i <= samples; ++i) io.output_times.push_back(T * i / samples);
        return trajectory_dict(m, integrate(m, k, state(x0, v0), T, io), io.output_times);
      },
      py::arg("metric"), py::arg("k"), py::arg("x0"), py::arg("v0"), py::arg("time"), py::arg("samples") = 256,
      py::arg("tol") = 1e-10);

  mod.def(
      "shoot",
      [](const ConformalMetric& m, const CurvatureFunction& k, const Vec3& x0, const Vec3& v0, double period) {
        return to_python(to_json(shoot(m, k, state(x0, v0), period)));
      },
      py::arg("metric"), py::arg("k"), py::arg("x0"), py::arg("v0"), py::arg("period") = 0.0);

  mod.def(
      "find_orbits",
      [](const ConformalMetric& m, const CurvatureFunction& k, int seeds, std::uint64_t rng) {
        return to_python(orbit_catalog(multistart_search(m, k, seeds, rng).orbits));
      },
      py::arg("metric"), py::arg("k"), py::arg("seeds") = 200, py::arg("rng") = 0);

  mod.def(
      "reduced_zeros",
      [](double k0, const CurvatureFunction& k1) { return to_python(reduction_report(k0, k1.id(), reduced_zeros(k1, k0))); },
      py::arg("k0"), py::arg("k1"));
  mod.def(
      "reduced_field",
      [](double k0, const CurvatureFunction& k1, const Vec3& w) { return Vec3(reduced_field_at(k1, k0, w.normalized())); },
      py::arg("k0"), py::arg("k1"), py::arg("w"));

  mod.def(
      "audit",
      [](const ConformalMetric& m, const CurvatureFunction& k, int seeds, std::optional<double> inj) {
        std::vector<ClosedOrbit> orbits;
        if (seeds > 0) orbits = multistart_search(m, k, seeds, 0).orbits;
        return to_python(to_json(audit(m, k, orbits, inj)));
      },
      py::arg("metric"), py::arg("k"), py::arg("seeds") = 0, py::arg("inj") = py::none(),
      "Hypotheses and extremes; with seeds > 0 also Gauss-Bonnet and length checks on found orbits.");

  mod.def(
      "continuation",
      [](const ConformalMetric& m, const CurvatureFunction& k, double k0, int steps) {
        ContinuationOptions opt;
        opt.steps = steps;
        const auto log = homotopy_continuation(m, k, k0, opt);
        std::ostringstream csv;
        write_continuation_csv(csv, log);
        py::dict d;
        d["csv"] = csv.str();
        d["degree_sums"] = log.degree_sums();
        d["terminated"] = log.terminated;
        d["final_degree_sum"] = log.final_degree_sum;
        d["warnings"] = log.warnings;
        return d;
      },
      py::arg("metric"), py::arg("k"), py::arg("k0") = 1.0, py::arg("steps") = 10);

  mod.def(
      "orthogonality_defect",
      [](const ConformalMetric& m, const CurvatureFunction& k, const Eigen::MatrixXd& pts) {
        if (pts.cols() != 3) fail(ErrorKind::config, "loop: expected an n x 3 array");
        std::vector<Vec3> p;
        for (Eigen::Index i = 0; i < pts.rows(); ++i) p.emplace_back(Vec3(pts.row(i).transpose()).normalized());
        return orthogonality_defect(m, k, LoopGrid(p));
      },
      py::arg("metric"), py::arg("k"), py::arg("points"));

  mod.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a magorbit subcommand; returns (exit code, stdout, stderr).");
}
