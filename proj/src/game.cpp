#include "ctskills/game.hpp"

#include <algorithm>

#include "ctskills/error.hpp"

namespace ctskills::game {

using instrument::DropZone;
using instrument::InstrumentConfig;
using instrument::ObjectRole;
using instrument::SceneryObject;

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::session_started: return "session_started";
    case EventKind::level_started: return "level_started";
    case EventKind::drag: return "drag";
    case EventKind::catch_object: return "catch";
    case EventKind::miss: return "miss";
    case EventKind::question_shown: return "question_shown";
    case EventKind::question_submitted: return "question_submitted";
    case EventKind::level_completed: return "level_completed";
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (auto k : {EventKind::session_started, EventKind::level_started, EventKind::drag, EventKind::catch_object,
                 EventKind::miss, EventKind::question_shown, EventKind::question_submitted,
                 EventKind::level_completed}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

bool payload_matches(const GameEvent& event) {
  switch (event.kind) {
    case EventKind::session_started: return std::holds_alternative<std::monostate>(event.payload);
    case EventKind::level_started:
    case EventKind::level_completed: return std::holds_alternative<LevelPayload>(event.payload);
    case EventKind::drag: return std::holds_alternative<DragPayload>(event.payload);
    case EventKind::catch_object:
    case EventKind::miss: return std::holds_alternative<InstancePayload>(event.payload);
    case EventKind::question_shown: return std::holds_alternative<ScreenPayload>(event.payload);
    case EventKind::question_submitted: return std::holds_alternative<scoring::Selection>(event.payload);
  }
  return false;
}

std::string_view to_string(InstanceStatus status) {
  switch (status) {
    case InstanceStatus::on_tree: return "on_tree";
    case InstanceStatus::in_basket: return "in_basket";
    case InstanceStatus::spoiled: return "spoiled";
    case InstanceStatus::falling: return "falling";
    case InstanceStatus::caught: return "caught";
    case InstanceStatus::landed: return "landed";
  }
  return "unknown";
}

std::string_view to_string(EffectKind kind) {
  switch (kind) {
    case EffectKind::placed_in_basket: return "placed_in_basket";
    case EffectKind::rejected_wrong_basket: return "rejected_wrong_basket";
    case EffectKind::returned_home: return "returned_home";
    case EffectKind::spoiled: return "spoiled";
    case EffectKind::caught: return "caught";
    case EffectKind::landed: return "landed";
    case EffectKind::basket_moved: return "basket_moved";
    case EffectKind::score_changed: return "score_changed";
    case EffectKind::level_completed: return "level_completed";
  }
  return "unknown";
}

namespace {

constexpr int kFallingLevel = 3;

[[noreturn]] void illegal(const GameEvent& event, const std::string& message,
                          ErrorCode code = ErrorCode::illegal_event) {
  throw Error(code, message + " at seq=" + std::to_string(event.seq), event.seq);
}

bool tracked(const SceneryObject& object, int level) {
  return object.role == ObjectRole::apple || (level == kFallingLevel && object.role == ObjectRole::leaf);
}

bool resolved(InstanceStatus status, int level) {
  if (level == kFallingLevel) return status == InstanceStatus::caught || status == InstanceStatus::spoiled;
  return status == InstanceStatus::in_basket || status == InstanceStatus::spoiled;
}

void mark_completion(const InstrumentConfig& config, Step& step) {
  if (!step.state.completed && all_apples_resolved(config, step.state)) {
    step.state.completed = true;
    step.effects.push_back({EffectKind::level_completed, {}, step.state.score});
  }
}

const SceneryObject& lookup(const instrument::Scenery& scenery, const GameEvent& event, const std::string& id) {
  const auto* object = scenery.find(id);
  if (object == nullptr) illegal(event, "unknown instance '" + id + "'");
  return *object;
}

Step apply_drag(const InstrumentConfig& config, const GameState& state, const GameEvent& event,
                const DragPayload& drag) {
  const auto& scenery = instrument::scenery_for(config, state.level);
  const auto& object = lookup(scenery, event, drag.instance);
  Step step{state, {}};
  if (state.level == kFallingLevel) {
    // Only the catching basket moves at level 3; its kinematics stay client-side.
    if (object.role != ObjectRole::basket || !object.draggable) {
      illegal(event, "instance '" + drag.instance + "' cannot be dragged at level 3");
    }
    step.effects.push_back({EffectKind::basket_moved, drag.instance, state.score});
    return step;
  }
  if (object.role != ObjectRole::apple || !object.draggable) {
    illegal(event, "instance '" + drag.instance + "' is not draggable");
  }
  if (scenery.resolve(drag.to) != drag.zone) {
    illegal(event, "drop zone mismatch: reported " + std::string(instrument::to_string(drag.zone)) +
                       ", drop point resolves to " + std::string(instrument::to_string(scenery.resolve(drag.to))));
  }
  auto& status = step.state.instances.at(drag.instance);
  if (status != InstanceStatus::on_tree) {
    illegal(event, "immobile instance '" + drag.instance + "' (" + std::string(to_string(status)) + ")");
  }
  switch (drag.zone) {
    case DropZone::basket_red:
    case DropZone::basket_yellow:
      if (object.basket == drag.zone) {
        status = InstanceStatus::in_basket;
        ++step.state.score;
        step.effects.push_back({EffectKind::placed_in_basket, drag.instance, 0});
        step.effects.push_back({EffectKind::score_changed, drag.instance, step.state.score});
      } else {
        step.effects.push_back({EffectKind::rejected_wrong_basket, drag.instance, 0});
      }
      break;
    case DropZone::grass:
      status = InstanceStatus::spoiled;
      step.effects.push_back({EffectKind::spoiled, drag.instance, 0});
      break;
    case DropZone::tree:
    case DropZone::other:
      step.effects.push_back({EffectKind::returned_home, drag.instance, 0});
      break;
  }
  mark_completion(config, step);
  return step;
}

Step apply_fall(const InstrumentConfig& config, const GameState& state, const GameEvent& event,
                const InstancePayload& payload) {
  if (state.level != kFallingLevel) illegal(event, "catch/miss events only occur at level 3");
  const auto& scenery = instrument::scenery_for(config, state.level);
  const auto& object = lookup(scenery, event, payload.instance);
  if (!tracked(object, state.level)) illegal(event, "instance '" + payload.instance + "' does not fall");
  Step step{state, {}};
  auto& status = step.state.instances.at(payload.instance);
  if (status != InstanceStatus::falling) {
    illegal(event, "instance '" + payload.instance + "' already " + std::string(to_string(status)));
  }
  const bool apple = object.role == ObjectRole::apple;
  if (event.kind == EventKind::catch_object) {
    status = InstanceStatus::caught;
    step.effects.push_back({EffectKind::caught, payload.instance, 0});
    if (apple) {
      ++step.state.score;
      step.effects.push_back({EffectKind::score_changed, payload.instance, step.state.score});
    }
  } else if (apple) {
    status = InstanceStatus::spoiled;
    step.effects.push_back({EffectKind::spoiled, payload.instance, 0});
  } else {
    status = InstanceStatus::landed;
    step.effects.push_back({EffectKind::landed, payload.instance, 0});
  }
  mark_completion(config, step);
  return step;
}

}  // namespace

GameState init_level(const InstrumentConfig& config, int level) {
  const auto& scenery = instrument::scenery_for(config, level);
  GameState state;
  state.level = level;
  const auto home = level == kFallingLevel ? InstanceStatus::falling : InstanceStatus::on_tree;
  for (const auto& object : scenery.objects) {
    if (tracked(object, level)) state.instances.emplace(object.id, home);
  }
  return state;
}

Step apply_event(const InstrumentConfig& config, const GameState& state, const GameEvent& event) {
  if (!payload_matches(event)) illegal(event, "payload does not match event kind");
  if (state.completed) illegal(event, "level " + std::to_string(state.level) + " is already completed");
  switch (event.kind) {
    case EventKind::drag: return apply_drag(config, state, event, std::get<DragPayload>(event.payload));
    case EventKind::catch_object:
    case EventKind::miss: return apply_fall(config, state, event, std::get<InstancePayload>(event.payload));
    default: illegal(event, "'" + std::string(to_string(event.kind)) + "' is not a gameplay event");
  }
}

bool all_apples_resolved(const InstrumentConfig& config, const GameState& state) {
  const auto& scenery = instrument::scenery_for(config, state.level);
  for (const auto& object : scenery.objects) {
    if (object.role != ObjectRole::apple) continue;
    auto it = state.instances.find(object.id);
    if (it == state.instances.end() || !resolved(it->second, state.level)) return false;
  }
  return true;
}

std::map<ItemId, std::map<InstanceStatus, int>> status_counts(const InstrumentConfig& config,
                                                              const GameState& state) {
  std::map<ItemId, std::map<InstanceStatus, int>> counts;
  const auto& scenery = instrument::scenery_for(config, state.level);
  for (const auto& object : scenery.objects) {
    auto it = state.instances.find(object.id);
    if (it != state.instances.end()) ++counts[object.item][it->second];
  }
  return counts;
}

bool conserved(const InstrumentConfig& config, const GameState& state) {
  const auto& scenery = instrument::scenery_for(config, state.level);
  std::map<ItemId, int> initial;
  for (const auto& object : scenery.objects) {
    if (tracked(object, state.level)) ++initial[object.item];
  }
  if (state.instances.size() != static_cast<std::size_t>(std::count_if(
                                    scenery.objects.begin(), scenery.objects.end(),
                                    [&](const SceneryObject& o) { return tracked(o, state.level); }))) {
    return false;
  }
  auto counts = status_counts(config, state);
  for (const auto& [item, n] : initial) {
    int total = 0;
    for (const auto& [status, c] : counts[item]) total += c;
    if (total != n) return false;
  }
  return true;
}

bool score_consistent(const InstrumentConfig& config, const GameState& state) {
  const auto& scenery = instrument::scenery_for(config, state.level);
  const auto counted = state.level == kFallingLevel ? InstanceStatus::caught : InstanceStatus::in_basket;
  int n = 0;
  for (const auto& object : scenery.objects) {
    if (object.role != ObjectRole::apple) continue;
    auto it = state.instances.find(object.id);
    if (it != state.instances.end() && it->second == counted) ++n;
  }
  return n == state.score;
}

bool SessionState::finished() const {
  return submitted.contains(Cell{Question::Q4, kLevelCount});
}

std::optional<Cell> expected_submission(const SessionState& state) {
  if (state.current_level == 0 || !state.acknowledged_levels.contains(state.current_level)) return std::nullopt;
  if (!state.screen || state.screen->level != state.current_level) {
    return Cell{Question::Q1, state.current_level};
  }
  if (!state.screen_submitted) return state.screen;
  if (state.screen->question == Question::Q4) return std::nullopt;
  return Cell{static_cast<Question>(static_cast<int>(state.screen->question) + 1), state.current_level};
}

SessionStep apply_session_event(const InstrumentConfig& config, const SessionState& state, const GameEvent& event) {
  if (!payload_matches(event)) illegal(event, "payload does not match event kind");
  SessionStep step{state, {}};
  auto& s = step.state;
  if (event.kind == EventKind::session_started) {
    if (s.started) illegal(event, "session already started");
    s.started = true;
    s.session_id = event.session_id;
    return step;
  }
  if (!s.started) illegal(event, "session not started");

  switch (event.kind) {
    case EventKind::level_started: {
      int level = std::get<LevelPayload>(event.payload).level;
      if (level < 1 || level > kLevelCount) illegal(event, "invalid level " + std::to_string(level));
      if (level != s.current_level + 1) {
        illegal(event, "level " + std::to_string(level) + " started out of order");
      }
      if (s.current_level > 0 && !s.acknowledged_levels.contains(s.current_level)) {
        illegal(event, "level " + std::to_string(s.current_level) + " not completed");
      }
      s.current_level = level;
      s.levels[level] = init_level(config, level);
      return step;
    }
    case EventKind::drag:
    case EventKind::catch_object:
    case EventKind::miss: {
      if (s.current_level == 0) illegal(event, "no level in progress");
      auto result = apply_event(config, s.levels.at(s.current_level), event);
      s.levels[s.current_level] = std::move(result.state);
      step.effects = std::move(result.effects);
      return step;
    }
    case EventKind::level_completed: {
      int level = std::get<LevelPayload>(event.payload).level;
      if (level != s.current_level) illegal(event, "event for non-current level " + std::to_string(level));
      if (s.acknowledged_levels.contains(level)) illegal(event, "level already completed");
      if (!s.levels.at(level).completed) illegal(event, "level " + std::to_string(level) + " has unresolved apples");
      s.acknowledged_levels.insert(level);
      return step;
    }
    case EventKind::question_shown: {
      Cell cell = std::get<ScreenPayload>(event.payload).cell;
      if (!cell.valid()) illegal(event, "invalid question cell");
      if (cell.level != s.current_level) illegal(event, "event for non-current level " + std::to_string(cell.level));
      if (!s.acknowledged_levels.contains(cell.level)) illegal(event, "questions shown before level completion");
      if (s.screen && s.screen->level == cell.level && cell.question <= s.screen->question) {
        illegal(event, "question screen " + to_string(cell) + " shown out of order", ErrorCode::out_of_order_question);
      }
      s.screen = cell;
      s.screen_submitted = false;
      return step;
    }
    case EventKind::question_submitted: {
      const auto& selection = std::get<scoring::Selection>(event.payload);
      if (!selection.cell.valid()) illegal(event, "invalid question cell");
      if (selection.cell.level != s.current_level) {
        illegal(event, "event for non-current level " + std::to_string(selection.cell.level));
      }
      auto expected = expected_submission(s);
      if (!expected || *expected != selection.cell) {
        illegal(event,
                "submission for " + to_string(selection.cell) + " out of order (expected " +
                    (expected ? to_string(*expected) : std::string("none")) + ")",
                ErrorCode::out_of_order_question);
      }
      // Validates kind and palette membership.
      scoring::classify(instrument::spec_for(config, selection.cell), selection.chosen);
      s.screen = selection.cell;
      s.screen_submitted = true;
      s.submitted.insert(selection.cell);
      return step;
    }
    case EventKind::session_started: break;
  }
  illegal(event, "unhandled event kind");
}

void replay_into(const InstrumentConfig& config, ReplayResult& result, const std::vector<GameEvent>& events) {
  auto& state = result.state;
  for (const auto& event : events) {
    if (event.seq <= state.last_seq) {
      result.issues.push_back({event.seq, ErrorCode::seq_conflict,
                               "duplicate or decreasing seq=" + std::to_string(event.seq)});
      continue;
    }
    if (event.seq != state.last_seq + 1) {
      result.issues.push_back({event.seq, ErrorCode::seq_gap,
                               "non-contiguous sequence at seq=" + std::to_string(event.seq)});
    }
    if (state.last_at && event.at < *state.last_at) {
      result.issues.push_back({event.seq, ErrorCode::illegal_event,
                               "timestamp regression at seq=" + std::to_string(event.seq)});
    }
    if (state.started && event.session_id != state.session_id) {
      result.issues.push_back({event.seq, ErrorCode::illegal_event,
                               "session id mismatch at seq=" + std::to_string(event.seq)});
    }
    state.last_seq = event.seq;
    state.last_at = state.last_at ? std::max(*state.last_at, event.at) : event.at;
    try {
      auto step = apply_session_event(config, state, event);
      state = std::move(step.state);
      for (auto& effect : step.effects) result.effects.emplace_back(event.seq, std::move(effect));
      if (event.kind == EventKind::question_submitted) {
        result.selections.push_back(std::get<scoring::Selection>(event.payload));
      }
    } catch (const Error& e) {
      result.issues.push_back({event.seq, e.code(), e.what()});
    }
  }
}

ReplayResult replay(const InstrumentConfig& config, const std::vector<GameEvent>& events) {
  ReplayResult result;
  replay_into(config, result, events);
  return result;
}

}  // namespace ctskills::game
