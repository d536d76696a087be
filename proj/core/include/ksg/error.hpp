#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ksg {

enum class ErrorKind {
  Parse,
  DisconnectedGraph,
  NonpositiveLength,
  UnknownEdge,
  UnknownVertex,
  PathBudgetExceeded,
  NonpositiveTime,
  TimeOutOfRange,
  MeshMismatch,
  MeshTooCoarse,
  ConvergenceFailure,
  SolveFailure,
  QuadratureUnderResolved,
  PicardDiverged,
  StepUnstable,
  BoundViolated,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

// All library failures are reported through this type; `kind()` identifies
// the condition so callers (the CLI in particular) can map it to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace ksg
