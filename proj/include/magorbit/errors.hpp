#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace magorbit {

enum class ErrorKind {
  contract,        // caller broke a precondition
  config,          // bad user input (files, flags)
  domain,          // argument outside the mathematical domain
  unsupported,     // operation needs data the caller did not provide
  integration,     // ODE step-size underflow
  no_convergence,  // Newton / corrector stagnation
  degenerate,      // degenerate orbit or zero
  no_return,       // no first return within the horizon
  uncertified,     // index certificate below noise
  invariant,       // a mathematical invariant failed
  resolution,      // discretization too coarse
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class Trajectory;

// Step-size underflow; keeps whatever was integrated before the failure.
class IntegrationFailure : public Error {
 public:
  IntegrationFailure(const std::string& what, std::shared_ptr<const Trajectory> partial)
      : Error(ErrorKind::integration, what), partial_(std::move(partial)) {}
  const std::shared_ptr<const Trajectory>& partial() const noexcept { return partial_; }

 private:
  std::shared_ptr<const Trajectory> partial_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::contract, what);
}

}  // namespace magorbit
