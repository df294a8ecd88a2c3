#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ctskills/instrument.hpp"
#include "ctskills/scoring.hpp"
#include "ctskills/session.hpp"
#include "ctskills/stats.hpp"

namespace ctskills::analytics {

// A session reduced to what the tables need. Built once per analysis.
struct ScoredSession {
  StudentProfile profile;
  std::vector<scoring::Selection> selections;      // attempted cells only
  std::vector<scoring::ScoreBreakdown> reports;    // same order as selections
  std::optional<double> aggregate;

  const scoring::ScoreBreakdown* report(Cell cell) const;
  const scoring::Selection* selection(Cell cell) const;
};

// Throws replay_rejected if a record does not replay cleanly.
std::vector<ScoredSession> score_sessions(const instrument::InstrumentConfig& config,
                                          const std::vector<SessionRecord>& records,
                                          scoring::AggregationMode mode = scoring::AggregationMode::flat);

enum class ElementStatus { target, optional, nontarget };
std::string_view to_string(ElementStatus status);

struct SelectionRateRow {
  Element element;
  ElementStatus status = ElementStatus::nontarget;
  std::string group;  // "all" or the grade number
  int attempted = 0;
  int selected = 0;
  double percent = 0;
};

struct SelectionRateTable {
  Cell cell;
  bool empty = true;  // no session attempted the cell
  std::vector<std::string> groups;
  std::vector<SelectionRateRow> rows;  // grouped by element, then group
};

// Item questions list the whole palette. Pair questions list targets,
// optional targets and every non-target pair that occurs in the data.
SelectionRateTable selection_rates(const instrument::InstrumentConfig& config, const std::vector<ScoredSession>& sessions,
                                   Cell cell, bool by_grade = false);

// Rescaled scores are binned to the nearest integer, halves rounding up.
int score_bin(double rescaled);
inline constexpr int kScoreBins = 6;

struct ScoreDistributionRow {
  Cell cell;
  int score = 0;
  int count = 0;
  double percent = 0;
};
// Every attempted cell gets all bins 0..5; cells nobody attempted are absent.
std::vector<ScoreDistributionRow> score_distribution(const std::vector<ScoredSession>& sessions);

struct GradeAverageRow {
  int grade = 0;
  Question question = Question::Q1;
  int cells = 0;
  double mean = 0;
};
std::vector<GradeAverageRow> average_by_grade(const std::vector<ScoredSession>& sessions);

struct DemographicRow {
  std::string group;  // group label, "(none)", or "total"
  int students = 0;
  int age_min = 0, age_max = 0;
  double age_mean = 0, age_sd = 0;  // sample SD, 0 for a single student
  int female = 0, male = 0, other = 0, undisclosed = 0;

  // "10 - 10 years (μ = 10.0 ± 0.0)"
  std::string age_text() const;
};
// One row per group; a total row is appended when there are several groups.
std::vector<DemographicRow> demographic_summary(const std::vector<ScoredSession>& sessions);

enum class TestKind { anova, chi_square, tukey_pair, variance_component };
std::string_view to_string(TestKind kind);

struct StatTestResult {
  TestKind test = TestKind::anova;
  std::string factor;  // grade, gender, student, question
  std::string label;   // what was compared
  double statistic = 0;
  double df1 = 0;
  std::optional<double> df2;
  double p_value = 1;
  std::optional<double> md;
  std::optional<double> variance;
  std::optional<double> sd;
  std::string note;  // "undefined", "truncated", "skipped: ..."
};

struct TestOptions {
  double alpha = 0.05;
  bool continuity_correction = false;
};

// Samples are per-student aggregates, per-(student, question) means across
// levels, or per-cell scores, depending on the test.
std::vector<StatTestResult> run_tests(const std::vector<ScoredSession>& sessions, const TestOptions& options = {});

// CSV writers with a fixed column order.
void write_csv(std::ostream& out, const SelectionRateTable& table);
void write_csv(std::ostream& out, const std::vector<ScoreDistributionRow>& rows);
void write_csv(std::ostream& out, const std::vector<GradeAverageRow>& rows);
void write_csv(std::ostream& out, const std::vector<DemographicRow>& rows);
void write_csv(std::ostream& out, const std::vector<StatTestResult>& rows);

// Writes the complete table set into dir and returns the paths written.
std::vector<std::filesystem::path> write_tables(const instrument::InstrumentConfig& config,
                                                const std::vector<ScoredSession>& sessions,
                                                const std::filesystem::path& dir, bool by_grade = false,
                                                const TestOptions& options = {});

// Number formatting shared by all tables: shortest round-trip form.
std::string format_number(double value);

}  // namespace ctskills::analytics
