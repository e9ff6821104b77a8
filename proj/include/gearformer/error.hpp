#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gearformer {

// Machine-readable error classes. The service maps these one-to-one onto
// API error codes and the CLI onto exit codes.
enum class ErrorCode {
  kBadRequest,
  kNotFound,
  kGrammarViolation,
  kContextLimit,
  kCapacity,
  kInternal,
};

std::string_view error_code_name(ErrorCode code);
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string detail = {})
      : std::runtime_error(std::move(message)), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const { return code_; }
  // Rule name for grammar violations, stage name for pipeline failures.
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace gearformer
