#include "ctskills/analytics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "ctskills/error.hpp"

namespace ctskills::analytics {

namespace {

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

// Groups keyed in ascending order, values are samples.
using Keyed = std::map<std::string, stats::Sample>;
using KeyedByInt = std::map<int, stats::Sample>;

template <typename Map>
stats::Groups groups_of(const Map& keyed) {
  stats::Groups out;
  for (const auto& [key, sample] : keyed) out.push_back(sample);
  return out;
}

StatTestResult skipped(TestKind kind, std::string factor, std::string label, const std::string& why) {
  StatTestResult r;
  r.test = kind;
  r.factor = std::move(factor);
  r.label = std::move(label);
  r.statistic = std::numeric_limits<double>::quiet_NaN();
  r.df1 = 0;
  r.p_value = std::numeric_limits<double>::quiet_NaN();
  r.note = "skipped: " + why;
  return r;
}

StatTestResult anova_row(std::string factor, std::string label, const stats::Groups& groups) {
  try {
    auto a = stats::one_way_anova(groups);
    StatTestResult r;
    r.test = TestKind::anova;
    r.factor = std::move(factor);
    r.label = std::move(label);
    r.statistic = a.f;
    r.df1 = a.df_between;
    r.df2 = a.df_within;
    r.p_value = a.p_value;
    if (a.undefined) r.note = "undefined";
    return r;
  } catch (const Error& e) {
    return skipped(TestKind::anova, std::move(factor), std::move(label), e.what());
  }
}

StatTestResult component_row(const std::string& factor, const stats::Groups& groups) {
  try {
    auto c = stats::variance_component(groups);
    auto a = stats::one_way_anova(groups);
    StatTestResult r;
    r.test = TestKind::variance_component;
    r.factor = factor;
    r.label = "rescaled score";
    r.df1 = a.df_between;
    r.df2 = a.df_within;
    if (a.undefined) {
      r.statistic = 0;
      r.p_value = 1;
      r.note = "undefined";
    } else {
      r.statistic = a.f;
      r.p_value = a.p_value;
    }
    r.variance = c.variance;
    r.sd = c.sd;
    if (c.truncated) r.note = "truncated";
    return r;
  } catch (const Error& e) {
    return skipped(TestKind::variance_component, factor, "rescaled score", e.what());
  }
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0) return "0";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

const scoring::ScoreBreakdown* ScoredSession::report(Cell cell) const {
  for (const auto& r : reports) {
    if (r.cell == cell) return &r;
  }
  return nullptr;
}

const scoring::Selection* ScoredSession::selection(Cell cell) const {
  for (const auto& s : selections) {
    if (s.cell == cell) return &s;
  }
  return nullptr;
}

std::vector<ScoredSession> score_sessions(const instrument::InstrumentConfig& config,
                                          const std::vector<SessionRecord>& records, scoring::AggregationMode mode) {
  std::vector<ScoredSession> out;
  out.reserve(records.size());
  for (const auto& record : records) {
    auto derived = derive(config, record, scoring::ScoringOptions::from(config), mode);
    if (!derived.replay.clean()) {
      const auto& issue = derived.replay.issues.front();
      throw Error(ErrorCode::replay_rejected,
                  "session " + record.profile.session_id + " does not replay: " + issue.message, issue.seq);
    }
    ScoredSession s;
    s.profile = record.profile;
    for (const auto& selection : derived.replay.selections) {
      if (!selection.attempted) continue;
      s.selections.push_back(selection);
      s.reports.push_back(
          scoring::score_selection(instrument::spec_for(config, selection.cell), selection,
                                   scoring::ScoringOptions::from(config)));
    }
    s.aggregate = derived.aggregate;
    out.push_back(std::move(s));
  }
  // Canonical order makes every table independent of input order.
  std::sort(out.begin(), out.end(),
            [](const ScoredSession& a, const ScoredSession& b) { return a.profile.session_id < b.profile.session_id; });
  return out;
}

std::string_view to_string(ElementStatus status) {
  switch (status) {
    case ElementStatus::target: return "target";
    case ElementStatus::optional: return "optional";
    case ElementStatus::nontarget: return "nontarget";
  }
  return "nontarget";
}

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::anova: return "anova";
    case TestKind::chi_square: return "chi_square";
    case TestKind::tukey_pair: return "tukey_pair";
    case TestKind::variance_component: return "variance_component";
  }
  return "anova";
}

SelectionRateTable selection_rates(const instrument::InstrumentConfig& config, const std::vector<ScoredSession>& sessions,
                                   Cell cell, bool by_grade) {
  const auto& spec = instrument::spec_for(config, cell);
  SelectionRateTable table;
  table.cell = cell;

  std::map<std::string, int> attempted;
  std::map<std::pair<Element, std::string>, int> selected;
  ElementSet seen_nontargets;
  for (const auto& s : sessions) {
    const auto* selection = s.selection(cell);
    if (!selection) continue;
    const std::string group = by_grade ? std::to_string(s.profile.grade) : "all";
    ++attempted[group];
    for (const auto& e : selection->chosen) {
      ++selected[{e, group}];
      if (!spec.targets.contains(e) && !spec.optional_targets.contains(e)) seen_nontargets.insert(e);
    }
  }
  if (attempted.empty()) return table;
  table.empty = false;
  // Numeric order for grades.
  for (const auto& [g, n] : attempted) table.groups.push_back(g);
  std::sort(table.groups.begin(), table.groups.end(), [](const std::string& a, const std::string& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });

  std::vector<std::pair<Element, ElementStatus>> elements;
  for (const auto& e : spec.targets) elements.emplace_back(e, ElementStatus::target);
  for (const auto& e : spec.optional_targets) elements.emplace_back(e, ElementStatus::optional);
  if (spec.pair_kind()) {
    for (const auto& e : seen_nontargets) elements.emplace_back(e, ElementStatus::nontarget);
  } else {
    for (const auto& id : spec.palette) {
      if (!spec.targets.contains(Element{id})) elements.emplace_back(Element{id}, ElementStatus::nontarget);
    }
  }
  for (const auto& [element, status] : elements) {
    for (const auto& group : table.groups) {
      SelectionRateRow row;
      row.element = element;
      row.status = status;
      row.group = group;
      row.attempted = attempted[group];
      auto it = selected.find({element, group});
      row.selected = it == selected.end() ? 0 : it->second;
      row.percent = 100.0 * row.selected / row.attempted;
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

int score_bin(double rescaled) { return std::clamp(static_cast<int>(std::floor(rescaled + 0.5)), 0, kScoreBins - 1); }

std::vector<ScoreDistributionRow> score_distribution(const std::vector<ScoredSession>& sessions) {
  std::vector<ScoreDistributionRow> rows;
  for (int ordinal = 0; ordinal < kCellCount; ++ordinal) {
    const Cell cell = Cell::from_ordinal(ordinal);
    std::array<int, kScoreBins> counts{};
    int total = 0;
    for (const auto& s : sessions) {
      const auto* r = s.report(cell);
      if (!r || !r->rescaled) continue;
      ++counts[score_bin(*r->rescaled)];
      ++total;
    }
    if (total == 0) continue;
    for (int bin = 0; bin < kScoreBins; ++bin) {
      rows.push_back({cell, bin, counts[bin], 100.0 * counts[bin] / total});
    }
  }
  // Question-major.
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::pair{a.cell.question, a.cell.level} < std::pair{b.cell.question, b.cell.level};
  });
  return rows;
}

std::vector<GradeAverageRow> average_by_grade(const std::vector<ScoredSession>& sessions) {
  std::map<std::pair<int, Question>, std::vector<double>> scores;
  for (const auto& s : sessions) {
    for (const auto& r : s.reports) {
      if (r.rescaled) scores[{s.profile.grade, r.cell.question}].push_back(*r.rescaled);
    }
  }
  std::vector<GradeAverageRow> rows;
  for (const auto& [key, xs] : scores) {
    rows.push_back({key.first, key.second, static_cast<int>(xs.size()), mean_of(xs)});
  }
  return rows;
}

std::string DemographicRow::age_text() const {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d - %d years (μ = %.1f ± %.1f)", age_min, age_max, age_mean, age_sd);
  return buf;
}

std::vector<DemographicRow> demographic_summary(const std::vector<ScoredSession>& sessions) {
  auto summarize = [](std::string group, const std::vector<const StudentProfile*>& members) {
    DemographicRow row;
    row.group = std::move(group);
    row.students = static_cast<int>(members.size());
    std::vector<double> ages;
    for (const auto* p : members) {
      ages.push_back(p->age);
      switch (p->gender) {
        case Gender::female: ++row.female; break;
        case Gender::male: ++row.male; break;
        case Gender::other: ++row.other; break;
        case Gender::undisclosed: ++row.undisclosed; break;
      }
    }
    row.age_min = static_cast<int>(*std::min_element(ages.begin(), ages.end()));
    row.age_max = static_cast<int>(*std::max_element(ages.begin(), ages.end()));
    row.age_mean = mean_of(ages);
    if (ages.size() > 1) {
      double ss = 0;
      for (double a : ages) ss += (a - row.age_mean) * (a - row.age_mean);
      row.age_sd = std::sqrt(ss / static_cast<double>(ages.size() - 1));
    }
    return row;
  };
  std::map<std::string, std::vector<const StudentProfile*>> by_group;
  std::vector<const StudentProfile*> everyone;
  for (const auto& s : sessions) {
    by_group[s.profile.group.value_or("(none)")].push_back(&s.profile);
    everyone.push_back(&s.profile);
  }
  std::vector<DemographicRow> rows;
  for (const auto& [group, members] : by_group) rows.push_back(summarize(group, members));
  if (by_group.size() > 1) rows.push_back(summarize("total", everyone));
  return rows;
}

std::vector<StatTestResult> run_tests(const std::vector<ScoredSession>& sessions, const TestOptions& options) {
  std::vector<StatTestResult> rows;

  // Per-student aggregates by grade, then the post-hoc pairs.
  KeyedByInt by_grade;
  Keyed by_gender;
  for (const auto& s : sessions) {
    if (!s.aggregate) continue;
    by_grade[s.profile.grade].push_back(*s.aggregate);
    by_gender[std::string(to_string(s.profile.gender))].push_back(*s.aggregate);
  }
  rows.push_back(anova_row("grade", "aggregate", groups_of(by_grade)));
  std::vector<int> grades;
  for (const auto& [g, xs] : by_grade) grades.push_back(g);
  if (rows.back().note.empty()) {
    try {
      auto t = stats::tukey_hsd(groups_of(by_grade), options.alpha);
      for (const auto& p : t.pairs) {
        StatTestResult r;
        r.test = TestKind::tukey_pair;
        r.factor = "grade";
        r.label = "grade " + std::to_string(grades[p.a]) + " - grade " + std::to_string(grades[p.b]);
        r.statistic = p.q;
        r.df1 = t.k;
        r.df2 = t.df;
        r.p_value = p.p_value;
        r.md = p.md;
        if (p.significant) r.note = "significant";
        rows.push_back(std::move(r));
      }
    } catch (const Error& e) {
      rows.push_back(skipped(TestKind::tukey_pair, "grade", "aggregate", e.what()));
    }
  }

  // Per-question: each student's mean over the levels they attempted.
  for (auto q : {Question::Q1, Question::Q2, Question::Q3, Question::Q4}) {
    KeyedByInt groups;
    for (const auto& s : sessions) {
      std::vector<double> xs;
      for (const auto& r : s.reports) {
        if (r.cell.question == q && r.rescaled) xs.push_back(*r.rescaled);
      }
      if (!xs.empty()) groups[s.profile.grade].push_back(mean_of(xs));
    }
    rows.push_back(anova_row("grade", std::string(to_string(q)), groups_of(groups)));
  }

  rows.push_back(anova_row("gender", "aggregate", groups_of(by_gender)));

  // Grade x score bin over every attempted cell.
  {
    std::map<int, std::array<double, kScoreBins>> counts;
    for (const auto& s : sessions) {
      for (const auto& r : s.reports) {
        if (r.rescaled) counts[s.profile.grade][score_bin(*r.rescaled)] += 1;
      }
    }
    std::array<bool, kScoreBins> used{};
    for (const auto& [g, row] : counts)
      for (int b = 0; b < kScoreBins; ++b) used[b] = used[b] || row[b] > 0;
    std::vector<std::vector<double>> table;
    for (const auto& [g, row] : counts) {
      std::vector<double> kept;
      for (int b = 0; b < kScoreBins; ++b)
        if (used[b]) kept.push_back(row[b]);
      table.push_back(std::move(kept));
    }
    try {
      auto c = stats::chi_square_independence(table, options.continuity_correction);
      StatTestResult r;
      r.test = TestKind::chi_square;
      r.factor = "grade";
      r.label = "score bin";
      r.statistic = c.statistic;
      r.df1 = c.df;
      r.p_value = c.p_value;
      if (c.corrected) r.note = "continuity corrected";
      rows.push_back(std::move(r));
    } catch (const Error& e) {
      rows.push_back(skipped(TestKind::chi_square, "grade", "score bin", e.what()));
    }
  }

  // Variance components over per-cell scores.
  {
    Keyed by_student;
    KeyedByInt by_question, by_cell_grade;
    for (const auto& s : sessions) {
      for (const auto& r : s.reports) {
        if (!r.rescaled) continue;
        by_student[s.profile.session_id].push_back(*r.rescaled);
        by_question[static_cast<int>(r.cell.question)].push_back(*r.rescaled);
        by_cell_grade[s.profile.grade].push_back(*r.rescaled);
      }
    }
    rows.push_back(component_row("student", groups_of(by_student)));
    rows.push_back(component_row("question", groups_of(by_question)));
    rows.push_back(component_row("grade", groups_of(by_cell_grade)));
  }
  return rows;
}

void write_csv(std::ostream& out, const SelectionRateTable& table) {
  out << "question,level,element,status,group,attempted,selected,percent\n";
  if (table.empty) {
    out << "# empty: no session attempted " << to_string(table.cell) << "\n";
    return;
  }
  for (const auto& r : table.rows) {
    out << to_string(table.cell.question) << ',' << table.cell.level << ',' << csv_field(to_string(r.element)) << ','
        << to_string(r.status) << ',' << r.group << ',' << r.attempted << ',' << r.selected << ','
        << format_number(r.percent) << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<ScoreDistributionRow>& rows) {
  out << "question,level,score,count,percent\n";
  for (const auto& r : rows) {
    out << to_string(r.cell.question) << ',' << r.cell.level << ',' << r.score << ',' << r.count << ','
        << format_number(r.percent) << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<GradeAverageRow>& rows) {
  out << "grade,question,cells,mean\n";
  for (const auto& r : rows) {
    out << r.grade << ',' << to_string(r.question) << ',' << r.cells << ',' << format_number(r.mean) << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<DemographicRow>& rows) {
  out << "group,students,age,age_min,age_max,age_mean,age_sd,female,male,other,undisclosed\n";
  for (const auto& r : rows) {
    out << csv_field(r.group) << ',' << r.students << ',' << csv_field(r.age_text()) << ',' << r.age_min << ','
        << r.age_max << ',' << format_number(r.age_mean) << ',' << format_number(r.age_sd) << ',' << r.female << ','
        << r.male << ',' << r.other << ',' << r.undisclosed << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<StatTestResult>& rows) {
  out << "test,factor,label,statistic,df1,df2,p_value,md,variance,sd,note\n";
  for (const auto& r : rows) {
    out << to_string(r.test) << ',' << csv_field(r.factor) << ',' << csv_field(r.label) << ','
        << format_number(r.statistic) << ',' << format_number(r.df1) << ',' << optional_number(r.df2) << ','
        << format_number(r.p_value) << ',' << optional_number(r.md) << ',' << optional_number(r.variance) << ','
        << optional_number(r.sd) << ',' << csv_field(r.note) << '\n';
  }
}

std::vector<std::filesystem::path> write_tables(const instrument::InstrumentConfig& config,
                                                const std::vector<ScoredSession>& sessions,
                                                const std::filesystem::path& dir, bool by_grade,
                                                const TestOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, auto&& table) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
    write_csv(out, table);
    out.flush();
    if (!out) throw Error(ErrorCode::io_error, "write failed for " + path.string());
    written.push_back(path);
  };
  for (int ordinal = 0; ordinal < kCellCount; ++ordinal) {
    const Cell cell = Cell::from_ordinal(ordinal);
    emit("selection_rates_" + std::string(to_string(cell.question)) + "_L" + std::to_string(cell.level) + ".csv",
         selection_rates(config, sessions, cell, by_grade));
  }
  emit("score_distribution.csv", score_distribution(sessions));
  emit("avg_by_grade.csv", average_by_grade(sessions));
  emit("demographics.csv", demographic_summary(sessions));
  emit("tests.csv", run_tests(sessions, options));
  return written;
}

}  // namespace ctskills::analytics
