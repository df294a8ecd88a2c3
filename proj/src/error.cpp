#include "ctskills/error.hpp"

namespace ctskills {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_request: return "bad_request";
    case ErrorCode::schema_violation: return "schema_violation";
    case ErrorCode::unknown_item: return "unknown_item";
    case ErrorCode::duplicate_cell: return "duplicate_cell";
    case ErrorCode::count_mismatch: return "count_mismatch";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::kind_mismatch: return "kind_mismatch";
    case ErrorCode::element_not_on_palette: return "element_not_on_palette";
    case ErrorCode::degenerate_range: return "degenerate_range";
    case ErrorCode::no_score_assignable: return "no_score_assignable";
    case ErrorCode::invalid_profile: return "invalid_profile";
    case ErrorCode::grade_out_of_range: return "grade_out_of_range";
    case ErrorCode::age_out_of_range: return "age_out_of_range";
    case ErrorCode::duplicate_session: return "duplicate_session";
    case ErrorCode::unknown_session: return "unknown_session";
    case ErrorCode::seq_gap: return "seq_gap";
    case ErrorCode::seq_conflict: return "seq_conflict";
    case ErrorCode::session_closed: return "session_closed";
    case ErrorCode::session_open: return "session_open";
    case ErrorCode::replay_rejected: return "replay_rejected";
    case ErrorCode::out_of_order_question: return "out_of_order_question";
    case ErrorCode::illegal_event: return "illegal_event";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::unauthorized: return "unauthorized";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::internal: return "internal";
  }
  return "internal";
}

}  // namespace ctskills
