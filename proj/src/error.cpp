#include "psos/error.hpp"

namespace psos {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidCovariance: return "InvalidCovariance";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::OddOrder: return "OddOrder";
    case ErrorCode::OrderTooLarge: return "OrderTooLarge";
    case ErrorCode::BasisTooLarge: return "BasisTooLarge";
    case ErrorCode::MissingOrder: return "MissingOrder";
    case ErrorCode::DegreeOverflow: return "DegreeOverflow";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::EstimationFailed: return "EstimationFailed";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NotColinear: return "NotColinear";
    case ErrorCode::ParamOutOfRange: return "ParamOutOfRange";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::MissingSummary: return "MissingSummary";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace psos
