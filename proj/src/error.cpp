#include "robkmr/error.hpp"

namespace robkmr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::DegenerateScale: return "degenerate_scale";
    case ErrorCode::DegenerateWeights: return "degenerate_weights";
    case ErrorCode::DegenerateTest: return "degenerate_test";
    case ErrorCode::PerfectFit: return "perfect_fit";
    case ErrorCode::RankDeficient: return "rank_deficient";
    case ErrorCode::Numerical: return "numerical";
    case ErrorCode::NotConverged: return "not_converged";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

}  // namespace robkmr
