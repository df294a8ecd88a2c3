#include "ctskills/simulate.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ctskills/error.hpp"
#include "ctskills/game.hpp"

namespace ctskills::simulate {

namespace {

using instrument::DropZone;
using instrument::ObjectRole;
using instrument::Point;
using instrument::Scenery;

constexpr double kCanvasWidth = 1024;
constexpr double kCanvasHeight = 768;
constexpr double kTwoPi = 6.283185307179586;

Point point_in(const Scenery& scenery, DropZone zone, Rng& rng) {
  instrument::Rect area{{0, 0}, {kCanvasWidth, kCanvasHeight}};
  for (const auto& region : scenery.zones) {
    if (region.zone == zone) {
      area = region.bounds;
      break;
    }
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Point p{std::round(area.min.x + rng.uniform() * (area.max.x - area.min.x)),
            std::round(area.min.y + rng.uniform() * (area.max.y - area.min.y))};
    if (scenery.resolve(p) == zone) return p;
  }
  throw Error(ErrorCode::internal, "no drop point for zone " + std::string(instrument::to_string(zone)));
}

bool has_zone(const Scenery& scenery, DropZone zone) {
  return std::any_of(scenery.zones.begin(), scenery.zones.end(), [&](const auto& r) { return r.zone == zone; });
}

// All pairs over the palette that are neither targets nor optional targets.
std::vector<ItemPair> nontarget_pairs(const instrument::QuestionSpec& spec) {
  const bool ordered = spec.kind == instrument::SelectionKind::OrderedPair;
  std::vector<ItemPair> pool;
  for (const auto& a : spec.palette) {
    for (const auto& b : spec.palette) {
      if (a == b || (!ordered && b < a)) continue;
      auto pair = ItemPair::make(a, b, ordered);
      if (spec.targets.contains(Element{pair}) || spec.optional_targets.contains(Element{pair})) continue;
      pool.push_back(std::move(pair));
    }
  }
  return pool;
}

class SessionWriter {
 public:
  SessionWriter(std::string id, Timestamp start, Rng& rng) : id_(std::move(id)), clock_(start), rng_(rng) {}

  void add(game::EventKind kind, game::Payload payload = std::monostate{}) {
    clock_ += std::chrono::milliseconds{300 + static_cast<int>(rng_.index(2700))};
    events_.push_back(game::GameEvent{id_, ++seq_, clock_, std::nullopt, kind, std::move(payload)});
  }
  Timestamp now() const { return clock_; }
  std::vector<game::GameEvent> take() { return std::move(events_); }

 private:
  std::string id_;
  Timestamp clock_;
  std::int64_t seq_ = 0;
  Rng& rng_;
  std::vector<game::GameEvent> events_;
};

void play_orchard_level(const Scenery& scenery, double skill, SessionWriter& out, Rng& rng) {
  std::vector<const instrument::SceneryObject*> apples;
  for (const auto& o : scenery.objects) {
    if (o.role == ObjectRole::apple && o.draggable) apples.push_back(&o);
  }
  for (std::size_t i = apples.size(); i > 1; --i) std::swap(apples[i - 1], apples[rng.index(i)]);
  auto drag = [&](const instrument::SceneryObject& o, DropZone zone) {
    out.add(game::EventKind::drag, game::DragPayload{o.id, o.home, point_in(scenery, zone, rng), zone});
  };
  for (const auto* apple : apples) {
    // Hesitation: put back on the tree or dropped in the sky.
    if (rng.bernoulli(0.25)) drag(*apple, rng.bernoulli(0.5) && has_zone(scenery, DropZone::tree) ? DropZone::tree : DropZone::other);
    if (rng.bernoulli(0.2)) {
      for (const auto& region : scenery.zones) {
        if ((region.zone == DropZone::basket_red || region.zone == DropZone::basket_yellow) &&
            region.zone != apple->basket) {
          drag(*apple, region.zone);
          break;
        }
      }
    }
    drag(*apple, rng.bernoulli(0.5 + 0.5 * skill) ? *apple->basket : DropZone::grass);
  }
}

void play_falling_level(const Scenery& scenery, double skill, SessionWriter& out, Rng& rng) {
  std::vector<const instrument::SceneryObject*> falling, baskets;
  for (const auto& o : scenery.objects) {
    if (o.role == ObjectRole::apple || o.role == ObjectRole::leaf) falling.push_back(&o);
    if (o.role == ObjectRole::basket && o.draggable) baskets.push_back(&o);
  }
  for (std::size_t i = falling.size(); i > 1; --i) std::swap(falling[i - 1], falling[rng.index(i)]);
  // The level ends with its last apple, so every leaf must come before it.
  auto last_apple = std::find_if(falling.rbegin(), falling.rend(), [](auto* o) { return o->role == ObjectRole::apple; });
  if (last_apple != falling.rend()) std::rotate(last_apple.base() - 1, last_apple.base(), falling.end());
  for (const auto* o : falling) {
    if (!baskets.empty() && rng.bernoulli(0.5)) {
      const auto* basket = baskets[rng.index(baskets.size())];
      Point to{std::round(rng.uniform() * kCanvasWidth), basket->home.y};
      out.add(game::EventKind::drag, game::DragPayload{basket->id, basket->home, to, scenery.resolve(to)});
    }
    const double p = o->role == ObjectRole::apple ? 0.5 + 0.5 * skill : 0.5;
    out.add(rng.bernoulli(p) ? game::EventKind::catch_object : game::EventKind::miss, game::InstancePayload{o->id});
  }
}

}  // namespace

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal(double mean, double sd) {
  // Box-Muller; 1 - u keeps the logarithm finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::internal, "Rng::index of an empty range");
  return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

CohortProfile parse_profile(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    CohortProfile p;
    p.seed = j.value("seed", std::uint64_t{1});
    p.attempt_rate = j.value("attempt_rate", 1.0);
    p.language = j.value("language", std::string("de"));
    if (j.contains("group")) p.group = j.at("group").get<std::string>();
    if (j.contains("difficulty")) {
      const auto& d = j.at("difficulty");
      if (!d.is_array() || d.size() != kQuestionCount) {
        throw Error(ErrorCode::schema_violation, "difficulty must list one value per question");
      }
      for (int q = 0; q < kQuestionCount; ++q) p.difficulty[q] = d[q].get<double>();
    }
    for (const auto& g : j.at("grades")) {
      GradeProfile grade;
      grade.grade = g.at("grade").get<int>();
      grade.skill_mean = g.at("skill").get<double>();
      grade.skill_sd = g.value("sd", 0.0);
      grade.students = g.value("students", 0);
      p.grades.push_back(grade);
    }
    if (p.grades.empty()) throw Error(ErrorCode::schema_violation, "profile lists no grades");
    auto unit = [](double x) { return x >= 0 && x <= 1; };
    for (const auto& g : p.grades) {
      if (!unit(g.skill_mean) || g.skill_sd < 0 || g.students < 0) {
        throw Error(ErrorCode::schema_violation, "grade " + std::to_string(g.grade) + ": skill outside [0, 1]");
      }
    }
    if (!std::all_of(p.difficulty.begin(), p.difficulty.end(), unit) || !unit(p.attempt_rate)) {
      throw Error(ErrorCode::schema_violation, "difficulty and attempt_rate must lie in [0, 1]");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::schema_violation, std::string("cohort profile: ") + e.what());
  }
}

void set_total_students(CohortProfile& profile, int total) {
  if (profile.grades.empty() || total < 0) throw Error(ErrorCode::bad_request, "cannot distribute students");
  const int k = static_cast<int>(profile.grades.size());
  for (int i = 0; i < k; ++i) profile.grades[i].students = total / k + (i < total % k ? 1 : 0);
}

scoring::Selection simulate_selection(const instrument::QuestionSpec& spec, double skill, double difficulty, Rng& rng) {
  scoring::Selection s;
  s.cell = spec.cell;
  s.attempted = true;
  for (const auto& t : spec.targets) {
    if (rng.bernoulli(skill)) s.chosen.insert(t);
  }
  for (const auto& t : spec.optional_targets) {
    if (rng.bernoulli(skill)) s.chosen.insert(t);
  }
  const double p = std::clamp((1.0 - skill) * difficulty, 0.0, 1.0);
  if (!spec.pair_kind()) {
    for (const auto& id : spec.palette) {
      if (spec.targets.contains(Element{id})) continue;
      if (rng.bernoulli(p)) s.chosen.insert(Element{id});
    }
    return s;
  }
  auto pool = nontarget_pairs(spec);
  for (int slot = 0; slot < spec.nominal_nontargets && !pool.empty(); ++slot) {
    if (!rng.bernoulli(p)) continue;
    const auto i = rng.index(pool.size());
    s.chosen.insert(Element{pool[i]});
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return s;
}

std::vector<SessionRecord> simulate_cohort(const instrument::InstrumentConfig& config, const CohortProfile& profile) {
  Rng rng(profile.seed);
  std::vector<SessionRecord> out;
  // Sessions start one minute apart from a fixed epoch.
  Timestamp start{std::chrono::milliseconds{1709625600000}};
  int index = 0;
  for (const auto& grade : profile.grades) {
    for (int n = 0; n < grade.students; ++n) {
      SessionRecord record;
      auto& p = record.profile;
      p.session_id = "sim-" + std::to_string(profile.seed) + "-" + std::to_string(index);
      p.grade = grade.grade;
      p.age = grade.grade + 6 + (rng.bernoulli(0.2) ? 1 : 0);
      p.gender = rng.bernoulli(0.5) ? Gender::female : Gender::male;
      p.language = profile.language;
      p.group = profile.group;
      record.created_at = start + std::chrono::minutes{index};
      const double skill = std::clamp(rng.normal(grade.skill_mean, grade.skill_sd), 0.0, 1.0);

      SessionWriter w(p.session_id, record.created_at, rng);
      w.add(game::EventKind::session_started);
      for (int level = 1; level <= kLevelCount; ++level) {
        const auto& scenery = instrument::scenery_for(config, level);
        w.add(game::EventKind::level_started, game::LevelPayload{level});
        if (level == kLevelCount) {
          play_falling_level(scenery, skill, w, rng);
        } else {
          play_orchard_level(scenery, skill, w, rng);
        }
        w.add(game::EventKind::level_completed, game::LevelPayload{level});
        for (auto q : {Question::Q1, Question::Q2, Question::Q3, Question::Q4}) {
          const auto& spec = instrument::spec_for(config, q, level);
          w.add(game::EventKind::question_shown, game::ScreenPayload{spec.cell});
          if (!rng.bernoulli(profile.attempt_rate)) continue;
          auto selection = simulate_selection(spec, skill, profile.difficulty[index_of(q)], rng);
          w.add(game::EventKind::question_submitted, std::monostate{});
          auto events = w.take();
          selection.submitted_at = events.back().at;
          events.back().payload = std::move(selection);
          record.events.insert(record.events.end(), events.begin(), events.end());
        }
      }
      auto tail = w.take();
      record.events.insert(record.events.end(), tail.begin(), tail.end());
      record.closed_at = record.events.back().at;
      out.push_back(std::move(record));
      ++index;
    }
  }
  return out;
}

}  // namespace ctskills::simulate
