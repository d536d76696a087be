#include "ksg/error.hpp"

namespace ksg {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorKind::NonpositiveLength: return "NonpositiveLength";
    case ErrorKind::UnknownEdge: return "UnknownEdge";
    case ErrorKind::UnknownVertex: return "UnknownVertex";
    case ErrorKind::PathBudgetExceeded: return "PathBudgetExceeded";
    case ErrorKind::NonpositiveTime: return "NonpositiveTime";
    case ErrorKind::TimeOutOfRange: return "TimeOutOfRange";
    case ErrorKind::MeshMismatch: return "MeshMismatch";
    case ErrorKind::MeshTooCoarse: return "MeshTooCoarse";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::SolveFailure: return "SolveFailure";
    case ErrorKind::QuadratureUnderResolved: return "QuadratureUnderResolved";
    case ErrorKind::PicardDiverged: return "PicardDiverged";
    case ErrorKind::StepUnstable: return "StepUnstable";
    case ErrorKind::BoundViolated: return "BoundViolated";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace ksg
