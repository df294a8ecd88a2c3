#include "ctskills/session.hpp"

#include <algorithm>

#include "ctskills/error.hpp"

namespace ctskills {

std::string_view to_string(Gender gender) {
  switch (gender) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    case Gender::other: return "other";
    case Gender::undisclosed: return "undisclosed";
  }
  return "undisclosed";
}

std::optional<Gender> parse_gender(std::string_view text) {
  for (auto g : {Gender::female, Gender::male, Gender::other, Gender::undisclosed}) {
    if (to_string(g) == text) return g;
  }
  return std::nullopt;
}

DerivedSession derive(const instrument::InstrumentConfig& config, const SessionRecord& record,
                      const scoring::ScoringOptions& options, scoring::AggregationMode mode) {
  DerivedSession out;
  out.replay = game::replay(config, record.events);
  for (const auto& selection : out.replay.selections) {
    out.reports.push_back(scoring::score_selection(instrument::spec_for(config, selection.cell), selection, options));
  }
  std::sort(out.reports.begin(), out.reports.end(),
            [](const auto& a, const auto& b) { return a.cell.ordinal() < b.cell.ordinal(); });
  if (std::any_of(out.reports.begin(), out.reports.end(), [](const auto& r) { return r.attempted; })) {
    out.aggregate = scoring::aggregate_student(out.reports, mode);
  }
  return out;
}

}  // namespace ctskills
