#include "ctskills/codec.hpp"

#include "ctskills/error.hpp"

namespace ctskills::codec {

using game::EventKind;
using game::GameEvent;

namespace {

[[noreturn]] void schema(const std::string& message) { throw Error(ErrorCode::schema_violation, message); }

const json& field(const json& j, const char* key) {
  if (!j.is_object()) schema("expected an object");
  auto it = j.find(key);
  if (it == j.end()) schema(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) schema(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::int64_t int_field(const json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) schema(std::string("field '") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

ordered_json point(instrument::Point p) { return ordered_json::array({p.x, p.y}); }

instrument::Point decode_point(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    schema(std::string(what) + " must be a [x, y] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Cell decode_cell(const json& j) {
  auto q = parse_question(string_field(j, "question"));
  if (!q) throw Error(ErrorCode::out_of_range, "question must be one of Q1..Q4");
  Cell cell{*q, static_cast<int>(int_field(j, "level"))};
  if (!cell.valid()) throw Error(ErrorCode::out_of_range, "level must be 1..3");
  return cell;
}

}  // namespace

Timestamp decode_timestamp(const json& j, const char* what) {
  if (!j.is_string()) schema(std::string(what) + " must be an ISO-8601 string");
  auto t = parse_timestamp(j.get<std::string>());
  if (!t) schema(std::string(what) + " is not an ISO-8601 UTC timestamp: " + j.get<std::string>());
  return *t;
}

json parse_line(const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    schema(std::string("malformed JSON: ") + e.what());
  }
}

ordered_json encode(const Element& element) {
  if (const auto* item = std::get_if<ItemId>(&element)) return item->str();
  const auto& pair = std::get<ItemPair>(element);
  return ordered_json::array({pair.first().str(), pair.second().str()});
}

ordered_json encode(const scoring::Selection& selection) {
  ordered_json j;
  j["question"] = to_string(selection.cell.question);
  j["level"] = selection.cell.level;
  auto& chosen = j["chosen"] = ordered_json::array();
  for (const auto& e : selection.chosen) chosen.push_back(encode(e));
  j["attempted"] = selection.attempted;
  j["submitted_at"] = format_timestamp(selection.submitted_at);
  return j;
}

ordered_json encode(const GameEvent& event) {
  ordered_json j;
  j["v"] = kLogVersion;
  j["session_id"] = event.session_id;
  j["seq"] = event.seq;
  j["at"] = format_timestamp(event.at);
  if (event.received_at) j["received_at"] = format_timestamp(*event.received_at);
  j["kind"] = game::to_string(event.kind);
  ordered_json payload = ordered_json::object();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, game::LevelPayload>) {
          payload["level"] = p.level;
        } else if constexpr (std::is_same_v<T, game::DragPayload>) {
          payload["instance"] = p.instance;
          payload["from"] = point(p.from);
          payload["to"] = point(p.to);
          payload["zone"] = instrument::to_string(p.zone);
        } else if constexpr (std::is_same_v<T, game::InstancePayload>) {
          payload["instance"] = p.instance;
        } else if constexpr (std::is_same_v<T, game::ScreenPayload>) {
          payload["question"] = to_string(p.cell.question);
          payload["level"] = p.cell.level;
        } else if constexpr (std::is_same_v<T, scoring::Selection>) {
          payload = encode(p);
        }
      },
      event.payload);
  j["payload"] = std::move(payload);
  return j;
}

ordered_json encode(const StudentProfile& profile) {
  ordered_json j;
  j["session_id"] = profile.session_id;
  j["age"] = profile.age;
  j["grade"] = profile.grade;
  j["gender"] = to_string(profile.gender);
  j["language"] = profile.language;
  if (profile.group) j["group"] = *profile.group;
  return j;
}

ordered_json encode(const scoring::ScoreBreakdown& b) {
  ordered_json j;
  j["question"] = to_string(b.cell.question);
  j["level"] = b.cell.level;
  j["attempted"] = b.attempted;
  if (!b.attempted) return j;
  j["selected_targets"] = b.selected_targets;
  j["missed_targets"] = b.missed_targets;
  j["selected_nontargets"] = b.selected_nontargets;
  j["selected_optional"] = b.selected_optional;
  j["bonus"] = b.bonus;
  j["raw_score"] = b.raw_score;
  j["min_score"] = b.min_score;
  j["rescaled"] = *b.rescaled;
  return j;
}

ordered_json encode(const SessionRecord& record) {
  ordered_json j;
  j["v"] = kExportVersion;
  j["session_id"] = record.profile.session_id;
  j["profile"] = encode(record.profile);
  j["created_at"] = format_timestamp(record.created_at);
  j["closed_at"] = record.closed_at ? ordered_json(format_timestamp(*record.closed_at)) : ordered_json(nullptr);
  auto& events = j["events"] = ordered_json::array();
  for (const auto& e : record.events) events.push_back(encode(e));
  return j;
}

Element decode_element(const json& j, const instrument::QuestionSpec& spec) {
  if (spec.kind == instrument::SelectionKind::Item) {
    if (!j.is_string()) throw Error(ErrorCode::kind_mismatch, to_string(spec.cell) + " expects item ids");
    return ItemId(j.get<std::string>());
  }
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_string()) {
    throw Error(ErrorCode::kind_mismatch, to_string(spec.cell) + " expects [a, b] pairs");
  }
  return ItemPair::make(ItemId(j[0].get<std::string>()), ItemId(j[1].get<std::string>()),
                        spec.kind == instrument::SelectionKind::OrderedPair);
}

scoring::Selection decode_selection(const json& j, const instrument::InstrumentConfig& config) {
  scoring::Selection s;
  s.cell = decode_cell(j);
  const auto& spec = instrument::spec_for(config, s.cell);
  const auto& chosen = field(j, "chosen");
  if (!chosen.is_array()) schema("'chosen' must be an array");
  for (const auto& e : chosen) s.chosen.insert(decode_element(e, spec));
  s.attempted = j.value("attempted", true);
  if (!s.attempted && !s.chosen.empty()) schema("an unattempted selection must have no chosen elements");
  s.submitted_at = decode_timestamp(field(j, "submitted_at"), "submitted_at");
  return s;
}

GameEvent decode_event(const json& j, const instrument::InstrumentConfig& config) {
  try {
    GameEvent e;
    if (j.contains("v") && j["v"] != kLogVersion) schema("unsupported log version");
    e.session_id = string_field(j, "session_id");
    e.seq = int_field(j, "seq");
    if (e.seq < 1) schema("seq must be >= 1");
    e.at = decode_timestamp(field(j, "at"), "at");
    if (j.contains("received_at") && !j["received_at"].is_null()) {
      e.received_at = decode_timestamp(j["received_at"], "received_at");
    }
    auto kind = game::parse_event_kind(string_field(j, "kind"));
    if (!kind) schema("unknown event kind '" + j["kind"].get<std::string>() + "'");
    e.kind = *kind;
    const json empty = json::object();
    const json& p = j.contains("payload") ? j["payload"] : empty;
    switch (e.kind) {
      case EventKind::session_started: e.payload = std::monostate{}; break;
      case EventKind::level_started:
      case EventKind::level_completed:
        e.payload = game::LevelPayload{static_cast<int>(int_field(p, "level"))};
        break;
      case EventKind::drag: {
        auto zone = instrument::parse_drop_zone(string_field(p, "zone"));
        if (!zone) schema("unknown drop zone");
        e.payload = game::DragPayload{string_field(p, "instance"), decode_point(field(p, "from"), "from"),
                                      decode_point(field(p, "to"), "to"), *zone};
        break;
      }
      case EventKind::catch_object:
      case EventKind::miss: e.payload = game::InstancePayload{string_field(p, "instance")}; break;
      case EventKind::question_shown: e.payload = game::ScreenPayload{decode_cell(p)}; break;
      case EventKind::question_submitted: e.payload = decode_selection(p, config); break;
    }
    return e;
  } catch (const json::exception& ex) {
    schema(std::string("event schema violation: ") + ex.what());
  }
}

StudentProfile decode_profile(const json& j) {
  try {
    StudentProfile p;
    if (j.contains("session_id") && !j["session_id"].is_null()) p.session_id = string_field(j, "session_id");
    p.age = static_cast<int>(int_field(j, "age"));
    p.grade = static_cast<int>(int_field(j, "grade"));
    auto gender = parse_gender(j.value("gender", std::string("undisclosed")));
    if (!gender) throw Error(ErrorCode::invalid_profile, "gender must be female, male, other or undisclosed");
    p.gender = *gender;
    p.language = string_field(j, "language");
    if (j.contains("group") && !j["group"].is_null()) p.group = string_field(j, "group");
    return p;
  } catch (const json::exception& ex) {
    schema(std::string("profile schema violation: ") + ex.what());
  }
}

SessionRecord decode_record(const json& j, const instrument::InstrumentConfig& config) {
  try {
    SessionRecord r;
    if (field(j, "v") != kExportVersion) schema("unsupported session document version");
    r.profile = decode_profile(field(j, "profile"));
    if (string_field(j, "session_id") != r.profile.session_id) schema("session_id disagrees with profile");
    r.created_at = decode_timestamp(field(j, "created_at"), "created_at");
    if (j.contains("closed_at") && !j["closed_at"].is_null()) {
      r.closed_at = decode_timestamp(j["closed_at"], "closed_at");
    }
    const auto& events = field(j, "events");
    if (!events.is_array()) schema("'events' must be an array");
    for (const auto& e : events) r.events.push_back(decode_event(e, config));
    return r;
  } catch (const json::exception& ex) {
    schema(std::string("session document schema violation: ") + ex.what());
  }
}

ordered_json export_header() {
  ordered_json j;
  j["schema"] = kExportSchema;
  j["v"] = kExportVersion;
  return j;
}

bool is_export_header(const json& j) {
  return j.is_object() && j.contains("schema") && j["schema"] == kExportSchema;
}

}  // namespace ctskills::codec
