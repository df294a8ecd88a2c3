#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctskills/game.hpp"
#include "ctskills/scoring.hpp"
#include "ctskills/types.hpp"

namespace ctskills {

enum class Gender { female, male, other, undisclosed };

std::string_view to_string(Gender gender);
std::optional<Gender> parse_gender(std::string_view text);

struct StudentProfile {
  std::string session_id;  // opaque token, never derived from personal data
  int age = 0;
  int grade = 0;
  Gender gender = Gender::undisclosed;
  std::string language;  // IETF tag, e.g. "de" or "en-GB"
  // Optional classroom-session label used to group demographics.
  std::optional<std::string> group;

  bool operator==(const StudentProfile&) const = default;
};

struct SessionRecord {
  StudentProfile profile;
  std::vector<game::GameEvent> events;
  Timestamp created_at{};
  std::optional<Timestamp> closed_at;

  bool operator==(const SessionRecord&) const = default;
};

// Everything recomputable from a record's events.
struct DerivedSession {
  game::ReplayResult replay;
  std::vector<scoring::ScoreBreakdown> reports;  // one per attempted cell, in play order
  std::optional<double> aggregate;
};

DerivedSession derive(const instrument::InstrumentConfig& config, const SessionRecord& record,
                      const scoring::ScoringOptions& options,
                      scoring::AggregationMode mode = scoring::AggregationMode::flat);

}  // namespace ctskills
