#include "ctskills/scoring.hpp"

#include <algorithm>
#include <array>

#include "ctskills/error.hpp"

namespace ctskills::scoring {

using instrument::MinScoreMode;
using instrument::QuestionSpec;
using instrument::SelectionKind;

namespace {

void check_element(const QuestionSpec& spec, const Element& element) {
  if (spec.kind == SelectionKind::Item) {
    const auto* item = std::get_if<ItemId>(&element);
    if (item == nullptr) {
      throw Error(ErrorCode::kind_mismatch, to_string(spec.cell) + " expects items, got pair " + to_string(element));
    }
    if (!spec.palette.contains(*item)) {
      throw Error(ErrorCode::element_not_on_palette, item->str() + " is not on the " + to_string(spec.cell) + " palette");
    }
    return;
  }
  const auto* pair = std::get_if<ItemPair>(&element);
  if (pair == nullptr) {
    throw Error(ErrorCode::kind_mismatch, to_string(spec.cell) + " expects pairs, got item " + to_string(element));
  }
  if (pair->ordered() != (spec.kind == SelectionKind::OrderedPair)) {
    throw Error(ErrorCode::kind_mismatch, to_string(spec.cell) + " expects " + std::string(to_string(spec.kind)));
  }
  for (const auto* id : {&pair->first(), &pair->second()}) {
    if (!spec.palette.contains(*id)) {
      throw Error(ErrorCode::element_not_on_palette, id->str() + " is not on the " + to_string(spec.cell) + " palette");
    }
  }
}

}  // namespace

Classification classify(const QuestionSpec& spec, const ElementSet& chosen) {
  Classification out;
  for (const auto& element : chosen) {
    check_element(spec, element);
    if (spec.targets.contains(element)) {
      out.targets.insert(element);
    } else if (spec.optional_targets.contains(element)) {
      out.optional.insert(element);
    } else {
      out.nontargets.insert(element);
    }
  }
  return out;
}

double min_score(const QuestionSpec& spec, MinScoreMode mode) {
  const double x = spec.target_count();
  const double y = spec.nominal_nontargets;
  return mode == MinScoreMode::achievable ? -(x + y) : -x + y;
}

double rescale_unclamped(const QuestionSpec& spec, double raw, const ScoringOptions& options) {
  if (!(options.max_scaled > 0.0)) throw Error(ErrorCode::precondition, "max_scaled must be positive");
  const double lo = min_score(spec, options.min_score_mode);
  const double span = spec.target_count() - lo;
  if (span == 0.0) {
    throw Error(ErrorCode::degenerate_range, "rescale range is empty for " + to_string(spec.cell) + " (|X| == min_score)");
  }
  return options.max_scaled * (raw - lo) / span;
}

double rescale(const QuestionSpec& spec, double raw, const ScoringOptions& options) {
  return std::clamp(rescale_unclamped(spec, raw, options), 0.0, options.max_scaled);
}

ScoreBreakdown score_selection(const QuestionSpec& spec, const Selection& selection, const ScoringOptions& options) {
  if (selection.cell != spec.cell) {
    throw Error(ErrorCode::precondition, "selection for " + to_string(selection.cell) + " scored against " +
                                             to_string(spec.cell));
  }
  ScoreBreakdown out;
  out.cell = spec.cell;
  out.attempted = selection.attempted;
  out.min_score = min_score(spec, options.min_score_mode);
  if (!selection.attempted) {
    if (!selection.chosen.empty()) {
      throw Error(ErrorCode::precondition, "an unattempted selection must be empty");
    }
    return out;
  }
  const auto parts = classify(spec, selection.chosen);
  out.selected_targets = static_cast<int>(parts.targets.size());
  out.missed_targets = spec.target_count() - out.selected_targets;
  out.selected_nontargets = static_cast<int>(parts.nontargets.size());
  out.selected_optional = static_cast<int>(parts.optional.size());
  out.bonus = kOptionalBonus * out.selected_optional;
  out.raw_score = out.selected_targets - out.missed_targets - out.selected_nontargets + out.bonus;
  out.unclamped = rescale_unclamped(spec, out.raw_score, options);
  out.rescaled = std::clamp(*out.unclamped, 0.0, options.max_scaled);
  return out;
}

double aggregate_student(std::span<const ScoreBreakdown> reports, AggregationMode mode) {
  if (mode == AggregationMode::flat) {
    double sum = 0.0;
    int n = 0;
    for (const auto& r : reports) {
      if (r.attempted && r.rescaled) {
        sum += *r.rescaled;
        ++n;
      }
    }
    if (n == 0) throw Error(ErrorCode::no_score_assignable, "no score assignable: no attempted cells");
    return sum / n;
  }
  std::array<double, kQuestionCount> sums{};
  std::array<int, kQuestionCount> counts{};
  for (const auto& r : reports) {
    if (r.attempted && r.rescaled) {
      sums[index_of(r.cell.question)] += *r.rescaled;
      ++counts[index_of(r.cell.question)];
    }
  }
  double total = 0.0;
  int questions = 0;
  for (int q = 0; q < kQuestionCount; ++q) {
    if (counts[q] > 0) {
      total += sums[q] / counts[q];
      ++questions;
    }
  }
  if (questions == 0) throw Error(ErrorCode::no_score_assignable, "no score assignable: no attempted cells");
  return total / questions;
}

}  // namespace ctskills::scoring
