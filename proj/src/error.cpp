#include "weakkam/error.hpp"

namespace weakkam {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadInput: return "BadInput";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::EnergyDriftExceeded: return "EnergyDriftExceeded";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::BracketNotFound: return "BracketNotFound";
    case ErrorKind::NotStabilized: return "NotStabilized";
    case ErrorKind::LPInfeasible: return "LPInfeasible";
    case ErrorKind::SupOnBoundary: return "SupOnBoundary";
    case ErrorKind::ModelRejected: return "ModelRejected";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace weakkam
