#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "ctskills/error.hpp"
#include "ctskills/instrument.hpp"
#include "ctskills/scoring.hpp"
#include "ctskills/types.hpp"

namespace ctskills::game {

enum class EventKind {
  session_started,
  level_started,
  drag,
  catch_object,
  miss,
  question_shown,
  question_submitted,
  level_completed,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct LevelPayload {
  int level = 1;
  bool operator==(const LevelPayload&) const = default;
};

struct DragPayload {
  std::string instance;
  instrument::Point from;
  instrument::Point to;
  instrument::DropZone zone = instrument::DropZone::other;
  bool operator==(const DragPayload&) const = default;
};

// catch / miss
struct InstancePayload {
  std::string instance;
  bool operator==(const InstancePayload&) const = default;
};

struct ScreenPayload {
  Cell cell;
  bool operator==(const ScreenPayload&) const = default;
};

using Payload =
    std::variant<std::monostate, LevelPayload, DragPayload, InstancePayload, ScreenPayload, scoring::Selection>;

struct GameEvent {
  std::string session_id;
  std::int64_t seq = 0;
  Timestamp at{};
  // Server receipt time; set by the store, absent on client-built events.
  std::optional<Timestamp> received_at;
  EventKind kind = EventKind::session_started;
  Payload payload;

  bool operator==(const GameEvent&) const = default;
};

// Payload shape expected for each kind; false when they disagree.
bool payload_matches(const GameEvent& event);

enum class InstanceStatus { on_tree, in_basket, spoiled, falling, caught, landed };

std::string_view to_string(InstanceStatus status);

// Per-level state. Tracks apples at every level and leaves at level 3.
struct GameState {
  int level = 1;
  std::map<std::string, InstanceStatus> instances;
  int score = 0;
  bool completed = false;

  bool operator==(const GameState&) const = default;
};

enum class EffectKind {
  placed_in_basket,
  rejected_wrong_basket,
  returned_home,
  spoiled,
  caught,
  landed,
  basket_moved,
  score_changed,
  level_completed,
};

std::string_view to_string(EffectKind kind);

struct Effect {
  EffectKind kind;
  std::string instance;
  int value = 0;  // new score for score_changed
  bool operator==(const Effect&) const = default;
};

struct Step {
  GameState state;
  std::vector<Effect> effects;
};

GameState init_level(const instrument::InstrumentConfig& config, int level);

// Applies one gameplay event (drag, catch_object, miss) to a level state.
// Throws Error(illegal_event) with the event's seq as hint when the event is
// not legal for the level or the instance's status.
Step apply_event(const instrument::InstrumentConfig& config, const GameState& state, const GameEvent& event);

// True when every apple of the level has reached a terminal status.
bool all_apples_resolved(const instrument::InstrumentConfig& config, const GameState& state);

// Number of tracked instances per item class for each status. Used to check
// conservation: the statuses of a class always add up to its instance count.
std::map<ItemId, std::map<InstanceStatus, int>> status_counts(const instrument::InstrumentConfig& config,
                                                              const GameState& state);
bool conserved(const instrument::InstrumentConfig& config, const GameState& state);
// Level 1-2: score == in_basket; level 3: score == caught apples.
bool score_consistent(const instrument::InstrumentConfig& config, const GameState& state);

// Whole-session state: level progression and the question-screen cursor.
struct SessionState {
  std::string session_id;
  bool started = false;
  int current_level = 0;
  std::map<int, GameState> levels;
  std::set<int> acknowledged_levels;  // level_completed seen
  std::optional<Cell> screen;
  bool screen_submitted = false;
  std::set<Cell> submitted;
  std::int64_t last_seq = 0;
  std::optional<Timestamp> last_at;

  bool finished() const;  // last cell of the last level submitted
  bool operator==(const SessionState&) const = default;
};

// The cell a question_submitted event must target next, if any.
std::optional<Cell> expected_submission(const SessionState& state);

struct SessionStep {
  SessionState state;
  std::vector<Effect> effects;
};

// Applies any event kind, enforcing level order and the Q1..Q4 screen order.
// Does not check seq contiguity (replay does).
SessionStep apply_session_event(const instrument::InstrumentConfig& config, const SessionState& state,
                                const GameEvent& event);

struct ReplayIssue {
  std::int64_t seq = 0;
  ErrorCode code = ErrorCode::illegal_event;
  std::string message;
  bool operator==(const ReplayIssue&) const = default;
};

struct ReplayResult {
  SessionState state;
  std::vector<scoring::Selection> selections;
  std::vector<std::pair<std::int64_t, Effect>> effects;
  std::vector<ReplayIssue> issues;

  bool clean() const { return issues.empty(); }
  const std::map<int, GameState>& levels() const { return state.levels; }
};

// Deterministic fold over the log. Illegal events are reported and skipped;
// replay never throws for event-level problems.
ReplayResult replay(const instrument::InstrumentConfig& config, const std::vector<GameEvent>& events);

// Continues a previous replay with more events.
void replay_into(const instrument::InstrumentConfig& config, ReplayResult& result,
                 const std::vector<GameEvent>& events);

}  // namespace ctskills::game
