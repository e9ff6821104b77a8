#include "gearformer/error.hpp"

namespace gearformer {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kBadRequest:
      return "bad_request";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kGrammarViolation:
      return "grammar_violation";
    case ErrorCode::kContextLimit:
      return "context_limit";
    case ErrorCode::kCapacity:
      return "capacity";
    case ErrorCode::kInternal:
      return "internal";
  }
  return "internal";
}

int exit_code_for(ErrorCode code) { return 2 + static_cast<int>(code); }

}  // namespace gearformer
