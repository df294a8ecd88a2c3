#pragma once

// Synthetic cohorts with known generating parameters. Output is a plain list
// of session records that replay cleanly and depend only on the seed.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ctskills/instrument.hpp"
#include "ctskills/session.hpp"

namespace ctskills::simulate {

struct GradeProfile {
  int grade = 4;
  double skill_mean = 0.5;  // probability of picking each target
  double skill_sd = 0.0;    // per-student spread, clamped into [0, 1]
  int students = 0;
};

struct CohortProfile {
  std::vector<GradeProfile> grades;
  // Scales the non-target pick probability per question: p = (1 - skill) * d.
  std::array<double, kQuestionCount> difficulty{0.5, 0.5, 0.5, 0.5};
  // Probability that a question screen is answered rather than skipped.
  double attempt_rate = 1.0;
  std::uint64_t seed = 1;
  std::string language = "de";
  std::optional<std::string> group;
};

// JSON form:
// {"seed": 7, "difficulty": [..4..], "attempt_rate": 1.0,
//  "grades": [{"grade": 4, "skill": 0.4, "sd": 0.1, "students": 50}, ...]}
CohortProfile parse_profile(std::string_view text);

// Redistributes `total` students as evenly as possible over the grades,
// earlier grades taking the remainder.
void set_total_students(CohortProfile& profile, int total);

// Small portable generator: mt19937_64 output is fixed by the standard, the
// transforms below are ours, so results match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();                    // [0, 1)
  double normal(double mean, double sd);
  std::size_t index(std::size_t n);    // [0, n)
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// One student's answer to one cell. Each target is included with probability
// skill, each optional target likewise, and each non-target with probability
// (1 - skill) * difficulty. Pair questions draw up to four non-target pairs.
scoring::Selection simulate_selection(const instrument::QuestionSpec& spec, double skill, double difficulty, Rng& rng);

std::vector<SessionRecord> simulate_cohort(const instrument::InstrumentConfig& config, const CohortProfile& profile);

}  // namespace ctskills::simulate
