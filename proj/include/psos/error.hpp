#pragma once

#include <stdexcept>
#include <string>

namespace psos {

enum class ErrorCode {
  InvalidCovariance,
  InvalidSpec,
  OddOrder,
  OrderTooLarge,
  BasisTooLarge,
  MissingOrder,
  DegreeOverflow,
  SolverDiverged,
  EstimationFailed,
  RankDeficient,
  NotColinear,
  ParamOutOfRange,
  PreconditionFailed,
  MissingSummary,
  IoError,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace psos
