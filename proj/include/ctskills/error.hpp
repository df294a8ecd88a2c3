#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ctskills {

// Closed set of machine-readable error codes. The same tokens appear on the
// wire (service-api) and in CLI diagnostics.
enum class ErrorCode {
  bad_request,
  schema_violation,
  unknown_item,
  duplicate_cell,
  count_mismatch,
  out_of_range,
  kind_mismatch,
  element_not_on_palette,
  degenerate_range,
  no_score_assignable,
  invalid_profile,
  grade_out_of_range,
  age_out_of_range,
  duplicate_session,
  unknown_session,
  seq_gap,
  seq_conflict,
  session_closed,
  session_open,
  replay_rejected,
  out_of_order_question,
  illegal_event,
  precondition,
  unauthorized,
  not_found,
  io_error,
  internal,
};

std::string_view to_string(ErrorCode code);

// Every domain failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::int64_t> seq_hint = std::nullopt)
      : std::runtime_error(message), code_(code), seq_hint_(seq_hint) {}

  ErrorCode code() const noexcept { return code_; }
  const std::optional<std::int64_t>& seq_hint() const noexcept { return seq_hint_; }

 private:
  ErrorCode code_;
  std::optional<std::int64_t> seq_hint_;
};

}  // namespace ctskills
