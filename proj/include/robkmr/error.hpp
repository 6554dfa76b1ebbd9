#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace robkmr {

/// Failure categories. Scan records carry these as their status column.
enum class ErrorCode {
  InvalidArgument,
  Domain,
  DegenerateScale,
  DegenerateWeights,
  DegenerateTest,
  PerfectFit,
  RankDeficient,
  Numerical,
  NotConverged,
  Io,
  Parse,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace robkmr
