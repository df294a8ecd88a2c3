#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "../support/event_builder.hpp"
#include "../support/temp_dir.hpp"
#include "ctskills/analytics.hpp"
#include "ctskills/codec.hpp"
#include "ctskills/error.hpp"
#include "ctskills/simulate.hpp"

using namespace ctskills;
using namespace ctskills::analytics;
using instrument::default_instrument;
using testing_support::TempDir;

namespace {

const auto& config() { return default_instrument(); }

ScoredSession student(std::string id, int grade, std::vector<scoring::Selection> selections, int age = 10,
                      Gender gender = Gender::female) {
  ScoredSession s;
  s.profile = StudentProfile{std::move(id), age, grade, gender, "de", std::nullopt};
  for (auto& sel : selections) {
    s.reports.push_back(scoring::score_selection(instrument::spec_for(config(), sel.cell), sel));
    s.selections.push_back(std::move(sel));
  }
  if (!s.reports.empty()) s.aggregate = scoring::aggregate_student(s.reports);
  return s;
}

scoring::Selection pick(Question q, int level, std::initializer_list<const char*> items) {
  scoring::Selection s{{q, level}, {}, true, {}};
  for (const char* i : items) s.chosen.insert(ItemId(i));
  return s;
}

const SelectionRateRow& row_for(const SelectionRateTable& t, const std::string& element, const std::string& group = "all") {
  for (const auto& r : t.rows) {
    if (to_string(r.element) == element && r.group == group) return r;
  }
  throw std::logic_error("no row for " + element);
}

simulate::CohortProfile cohort(double skill, double difficulty, int students, std::uint64_t seed = 9) {
  simulate::CohortProfile p;
  p.seed = seed;
  p.grades = {{4, skill, 0.0, students}};
  p.difficulty.fill(difficulty);
  return p;
}

std::string export_of(const std::vector<SessionRecord>& records) {
  std::ostringstream out;
  out << codec::export_header().dump() << "\n";
  for (const auto& r : records) out << codec::encode(r).dump() << "\n";
  return out.str();
}

}  // namespace

TEST_CASE("selection rates") {
  const Cell q1l1{Question::Q1, 1};
  SUBCASE("target share over attempted sessions") {
    std::vector<ScoredSession> sessions{student("a", 4, {pick(Question::Q1, 1, {"apple_red"})}),
                                        student("b", 4, {pick(Question::Q1, 1, {})}),
                                        student("c", 4, {})};
    auto t = selection_rates(config(), sessions, q1l1);
    CHECK_FALSE(t.empty);
    const auto& apple = row_for(t, "apple_red");
    CHECK(apple.status == ElementStatus::target);
    CHECK(apple.attempted == 2);
    CHECK(apple.percent == 50.0);
  }
  SUBCASE("non-target column") {
    std::vector<ScoredSession> sessions{student("a", 4, {pick(Question::Q1, 1, {"rock"})}),
                                        student("b", 5, {pick(Question::Q1, 1, {"rock", "cloud"})})};
    auto t = selection_rates(config(), sessions, q1l1);
    CHECK(row_for(t, "rock").status == ElementStatus::nontarget);
    CHECK(row_for(t, "rock").percent == 100.0);
    // Whole palette is listed, one row per element.
    CHECK(t.rows.size() == instrument::spec_for(config(), q1l1).palette.size());
    for (const auto& r : t.rows) CHECK((r.percent >= 0 && r.percent <= 100));

    auto by_grade = selection_rates(config(), sessions, q1l1, true);
    CHECK(by_grade.groups == std::vector<std::string>{"4", "5"});
    CHECK(row_for(by_grade, "cloud", "4").percent == 0.0);
    CHECK(row_for(by_grade, "cloud", "5").percent == 100.0);
  }
  SUBCASE("pair questions list occurring non-target pairs") {
    scoring::Selection s{{Question::Q4, 1},
                         {ItemPair::make(ItemId("apple_red"), ItemId("basket_red"), false),
                          ItemPair::make(ItemId("grass"), ItemId("tree"), false)},
                         true, {}};
    auto t = selection_rates(config(), {student("a", 4, {s})}, {Question::Q4, 1});
    CHECK(row_for(t, "apple_red+basket_red").status == ElementStatus::target);
    CHECK(row_for(t, "apple_spoiled_red+grass").status == ElementStatus::optional);
    CHECK(row_for(t, "grass+tree").status == ElementStatus::nontarget);
    CHECK(t.rows.size() == 4);
  }
  SUBCASE("nobody attempted the cell") {
    auto t = selection_rates(config(), {student("a", 4, {})}, q1l1);
    CHECK(t.empty);
    std::ostringstream out;
    write_csv(out, t);
    CHECK(out.str().find("# empty") != std::string::npos);
  }
}

TEST_CASE("score distribution") {
  simulate::CohortProfile p = cohort(0.6, 0.5, 40);
  p.grades.push_back({6, 0.8, 0.1, 40});
  p.attempt_rate = 0.8;
  auto records = simulate::simulate_cohort(config(), p);
  auto sessions = score_sessions(config(), records);
  auto rows = score_distribution(sessions);
  std::map<int, double> totals;
  std::map<int, int> counts;
  for (const auto& r : rows) {
    totals[r.cell.ordinal()] += r.percent;
    counts[r.cell.ordinal()] += r.count;
  }
  CHECK(totals.size() == 12);
  for (const auto& [cell, total] : totals) {
    CAPTURE(cell);
    CHECK(std::abs(total - 100.0) <= 1e-9);
    // Denominator is the attempted sessions only.
    int attempted = 0;
    for (const auto& s : sessions) attempted += s.report(Cell::from_ordinal(cell)) != nullptr;
    CHECK(counts[cell] == attempted);
    CHECK(attempted < 80);
  }

  SUBCASE("tables do not depend on session order") {
    auto shuffled = records;
    std::mt19937_64 rng(4);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto other = score_sessions(config(), shuffled);
    std::ostringstream a, b;
    write_csv(a, score_distribution(sessions));
    write_csv(b, score_distribution(other));
    CHECK(a.str() == b.str());
    for (int ordinal = 0; ordinal < kCellCount; ++ordinal) {
      std::ostringstream x, y;
      write_csv(x, selection_rates(config(), sessions, Cell::from_ordinal(ordinal), true));
      write_csv(y, selection_rates(config(), other, Cell::from_ordinal(ordinal), true));
      CHECK(x.str() == y.str());
    }
  }
}

TEST_CASE("score bins round halves up") {
  CHECK(score_bin(0.0) == 0);
  CHECK(score_bin(1.875) == 2);
  CHECK(score_bin(2.5) == 3);
  CHECK(score_bin(3.125) == 3);
  CHECK(score_bin(5.0) == 5);
}

TEST_CASE("average by grade") {
  std::vector<ScoredSession> sessions{
      student("a", 4, {pick(Question::Q1, 1, {}), pick(Question::Q2, 1, {"apple_red"})}),
      student("b", 4, {pick(Question::Q1, 1, {"apple_red", "basket_red", "score", "apple_spoiled_red", "grass"})}),
      student("c", 5, {pick(Question::Q2, 1, {})})};
  auto rows = average_by_grade(sessions);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].grade == 4);
  CHECK(rows[0].question == Question::Q1);
  CHECK(rows[0].cells == 2);
  CHECK(rows[0].mean == doctest::Approx((1.875 + sessions[1].reports[0].rescaled.value()) / 2));
  CHECK(rows[1].mean == 5.0);
  CHECK(rows[2].grade == 5);
}

TEST_CASE("demographic summary") {
  SUBCASE("first fixture session") {
    std::vector<ScoredSession> sessions;
    for (int i = 0; i < 9; ++i) {
      sessions.push_back(student("p" + std::to_string(i), 4, {}, 10, i < 4 ? Gender::female : Gender::male));
    }
    auto rows = demographic_summary(sessions);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].age_text() == "10 - 10 years (μ = 10.0 ± 0.0)");
    CHECK(rows[0].female == 4);
    CHECK(rows[0].male == 5);
    CHECK(rows[0].students == 9);
  }
  SUBCASE("empty input") { CHECK(demographic_summary({}).empty()); }
  SUBCASE("single student") {
    auto rows = demographic_summary({student("x", 6, {}, 12)});
    CHECK(rows[0].age_text() == "12 - 12 years (μ = 12.0 ± 0.0)");
  }
  SUBCASE("groups and a total row") {
    auto a = student("a", 4, {}, 10);
    auto b = student("b", 5, {}, 12, Gender::male);
    a.profile.group = "class-1";
    b.profile.group = "class-2";
    auto rows = demographic_summary({a, b});
    REQUIRE(rows.size() == 3);
    CHECK(rows[2].group == "total");
    CHECK(rows[2].age_text() == "10 - 12 years (μ = 11.0 ± 1.4)");
  }
}

TEST_CASE("run_tests covers every family") {
  simulate::CohortProfile p;
  p.seed = 5;
  p.grades = {{4, 0.4, 0.15, 30}, {6, 0.6, 0.15, 30}, {8, 0.85, 0.1, 30}};
  auto sessions = score_sessions(config(), simulate::simulate_cohort(config(), p));
  auto rows = run_tests(sessions);
  int anova = 0, tukey = 0, chi = 0, components = 0;
  for (const auto& r : rows) {
    CAPTURE(r.label);
    CHECK(r.note.rfind("skipped", 0) == std::string::npos);
    CHECK((r.p_value >= 0 && r.p_value <= 1));
    CHECK(r.df1 > 0);
    switch (r.test) {
      case TestKind::anova: ++anova; break;
      case TestKind::tukey_pair: ++tukey; CHECK(r.md.has_value()); break;
      case TestKind::chi_square: ++chi; break;
      case TestKind::variance_component:
        ++components;
        CHECK(*r.variance >= 0);
        CHECK(*r.sd == doctest::Approx(std::sqrt(*r.variance)));
        break;
    }
  }
  CHECK(anova == 6);
  CHECK(tukey == 3);
  CHECK(chi == 1);
  CHECK(components == 3);
  CHECK(rows.front().p_value < 0.05);

  SUBCASE("a single grade skips the grade tests instead of failing") {
    auto one = score_sessions(config(), simulate::simulate_cohort(config(), cohort(0.5, 0.5, 10)));
    auto single = run_tests(one);
    CHECK(single.front().note.rfind("skipped", 0) == 0);
  }
}

TEST_CASE("write_tables emits the full set") {
  TempDir dir;
  auto sessions = score_sessions(config(), simulate::simulate_cohort(config(), cohort(0.7, 0.4, 12)));
  auto files = write_tables(config(), sessions, dir.path(), true);
  CHECK(files.size() == 16);
  for (const char* name : {"selection_rates_Q1_L1.csv", "selection_rates_Q4_L3.csv", "score_distribution.csv",
                           "avg_by_grade.csv", "demographics.csv", "tests.csv"}) {
    CHECK(std::filesystem::exists(dir.path() / name));
  }
  std::ifstream tests(dir.path() / "tests.csv");
  std::string header;
  std::getline(tests, header);
  CHECK(header == "test,factor,label,statistic,df1,df2,p_value,md,variance,sd,note");
}

TEST_CASE("score_sessions refuses logs that do not replay") {
  auto records = simulate::simulate_cohort(config(), cohort(0.5, 0.5, 1));
  records[0].events.erase(records[0].events.begin() + 2);
  CHECK_THROWS_AS(score_sessions(config(), records), Error);
}

TEST_CASE("simulator") {
  SUBCASE("perfect cohort scores 5 everywhere") {
    auto sessions = score_sessions(config(), simulate::simulate_cohort(config(), cohort(1.0, 1.0, 5)));
    for (const auto& s : sessions) {
      CHECK(s.reports.size() == 12);
      for (const auto& r : s.reports) CHECK(*r.rescaled == 5.0);
    }
  }
  SUBCASE("zero skill with every non-target scores 0 everywhere") {
    auto sessions = score_sessions(config(), simulate::simulate_cohort(config(), cohort(0.0, 1.0, 5)));
    for (const auto& s : sessions) {
      for (const auto& r : s.reports) CHECK(*r.rescaled == 0.0);
    }
  }
  SUBCASE("same seed, byte-identical output") {
    auto a = export_of(simulate::simulate_cohort(config(), cohort(0.6, 0.5, 20, 77)));
    auto b = export_of(simulate::simulate_cohort(config(), cohort(0.6, 0.5, 20, 77)));
    auto c = export_of(simulate::simulate_cohort(config(), cohort(0.6, 0.5, 20, 78)));
    CHECK(a == b);
    CHECK(a != c);
  }
  SUBCASE("every simulated session replays clean") {
    simulate::CohortProfile p = cohort(0.5, 0.7, 60);
    p.attempt_rate = 0.7;
    for (const auto& r : simulate::simulate_cohort(config(), p)) {
      auto replay = game::replay(config(), r.events);
      REQUIRE(replay.clean());
      CHECK(replay.levels().size() == 3);
    }
  }
  SUBCASE("selection frequencies follow the generating probabilities") {
    const auto& spec = instrument::spec_for(config(), Question::Q1, 2);
    simulate::Rng rng(123);
    const int n = 20000;
    int targets = 0, nontargets = 0;
    for (int i = 0; i < n; ++i) {
      auto s = simulate::simulate_selection(spec, 0.7, 0.5, rng);
      auto parts = scoring::classify(spec, s.chosen);
      targets += static_cast<int>(parts.targets.size());
      nontargets += static_cast<int>(parts.nontargets.size());
    }
    const double target_rate = static_cast<double>(targets) / (n * spec.target_count());
    const double nontarget_rate = static_cast<double>(nontargets) / (n * spec.nominal_nontargets);
    CHECK(std::abs(target_rate - 0.7) < 0.01);
    CHECK(std::abs(nontarget_rate - 0.15) < 0.01);
  }
  SUBCASE("profile parsing") {
    auto p = simulate::parse_profile(
        R"({"seed": 3, "difficulty": [0.1, 0.2, 0.3, 0.4], "grades": [{"grade": 4, "skill": 0.4, "sd": 0.1, "students": 5}]})");
    CHECK(p.seed == 3);
    CHECK(p.difficulty[3] == 0.4);
    CHECK(p.grades[0].students == 5);
    simulate::set_total_students(p, 11);
    CHECK(p.grades[0].students == 11);
    CHECK_THROWS_AS(simulate::parse_profile(R"({"grades": [{"grade": 4, "skill": 1.4}]})"), Error);
    CHECK_THROWS_AS(simulate::parse_profile("{"), Error);
  }
}
