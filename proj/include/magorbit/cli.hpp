#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "magorbit/errors.hpp"
#include "magorbit/sphere_geometry.hpp"

namespace magorbit {

// Everything a run depends on. Serialized into manifest.json; `magorbit rerun` reads it back.
struct RunConfig {
  std::string command;
  Json metric = Json{{"kind", "round"}};
  Json k;  // null: k0 + eps <x,e3> (for reduce: the perturbation, default height)
  double k0 = 1.0;
  double eps = 0.0;
  int seeds = 200;
  std::uint64_t rng = 0;
  std::optional<double> tol;  // integrator tolerance; per-command default
  int steps = 10;
  std::optional<Vec3> x0, v0;
  std::optional<double> time;
  int samples = 512;
  Json catalog;  // embedded entries, so a manifest is self-contained
  std::optional<double> inj;
  std::string out = ".";

  Json to_json() const;  // excludes `out`
  static RunConfig from_json(const Json& j);
};

// Process exit status for an error kind: 1 usage/config, 2 invariant, 3 numerical.
int exit_code(ErrorKind kind);

// Runs one subcommand. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_config(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace magorbit
