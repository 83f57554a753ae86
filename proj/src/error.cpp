#include "surfpinn/error.hpp"

namespace surfpinn {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateNormal: return "DegenerateNormal";
    case ErrorKind::OutsideBand: return "OutsideBand";
    case ErrorKind::AmbiguousProjection: return "AmbiguousProjection";
    case ErrorKind::UnsupportedSurface: return "UnsupportedSurface";
    case ErrorKind::InvalidCount: return "InvalidCount";
    case ErrorKind::NotSphereHomeomorphic: return "NotSphereHomeomorphic";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorKind::TableauMismatch: return "TableauMismatch";
    case ErrorKind::InvalidReference: return "InvalidReference";
    case ErrorKind::StageCountUnsupported: return "StageCountUnsupported";
    case ErrorKind::SingularStageSystem: return "SingularStageSystem";
    case ErrorKind::NoExactSolution: return "NoExactSolution";
    case ErrorKind::ZeroDenominator: return "ZeroDenominator";
    case ErrorKind::UnknownProblem: return "UnknownProblem";
    case ErrorKind::QuadratureTooCoarse: return "QuadratureTooCoarse";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace surfpinn
