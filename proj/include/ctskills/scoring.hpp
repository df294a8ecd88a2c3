#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ctskills/instrument.hpp"
#include "ctskills/types.hpp"

namespace ctskills::scoring {

// Scores are multiples of 0.5; comparisons between computed scores use this.
inline constexpr double kScoreTolerance = 1e-9;

inline constexpr double kOptionalBonus = 0.5;

// A student's submitted answer for one cell.
struct Selection {
  Cell cell;
  ElementSet chosen;
  bool attempted = true;
  Timestamp submitted_at{};

  bool operator==(const Selection&) const = default;
};

struct Classification {
  ElementSet targets;     // S_X
  ElementSet optional;    // selected optional targets
  ElementSet nontargets;  // S_Y
};

struct ScoreBreakdown {
  Cell cell;
  bool attempted = false;
  int selected_targets = 0;
  int missed_targets = 0;
  int selected_nontargets = 0;
  int selected_optional = 0;
  double bonus = 0.0;
  double raw_score = 0.0;
  double min_score = 0.0;
  // Absent when the cell was not attempted.
  std::optional<double> rescaled;
  // Value before clamping to [0, max_scaled]; absent when not attempted.
  std::optional<double> unclamped;

  bool operator==(const ScoreBreakdown&) const = default;
};

struct ScoringOptions {
  double max_scaled = 5.0;
  instrument::MinScoreMode min_score_mode = instrument::MinScoreMode::achievable;

  static ScoringOptions from(const instrument::InstrumentConfig& config) {
    return {config.max_scaled, config.min_score_mode};
  }
};

enum class AggregationMode {
  flat,          // mean over every attempted cell
  per_question,  // mean per question over its attempted levels, then across questions
};

// Partitions a submission into S_X, selected optional targets and S_Y.
// Throws kind_mismatch if an element does not match the spec's kind, and
// element_not_on_palette if it names an item the screen does not show.
Classification classify(const instrument::QuestionSpec& spec, const ElementSet& chosen);

// Minimum score used by the rescale for this spec.
double min_score(const instrument::QuestionSpec& spec, instrument::MinScoreMode mode);

// Linear map of a raw score onto [0, max_scaled], clamped.
double rescale(const instrument::QuestionSpec& spec, double raw, const ScoringOptions& options);
double rescale_unclamped(const instrument::QuestionSpec& spec, double raw, const ScoringOptions& options);

ScoreBreakdown score_selection(const instrument::QuestionSpec& spec, const Selection& selection,
                               const ScoringOptions& options = {});

// Throws no_score_assignable when no report is attempted.
double aggregate_student(std::span<const ScoreBreakdown> reports, AggregationMode mode = AggregationMode::flat);

}  // namespace ctskills::scoring
