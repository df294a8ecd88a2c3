#pragma once

// Structured-text (JSON) encodings shared by the store, the HTTP API and the
// CLI. Encoders emit a fixed field order so output is byte-stable; decoders
// ignore unknown fields and throw ctskills::Error on schema violations.

#include <string>

#include <json.hpp>

#include "ctskills/game.hpp"
#include "ctskills/instrument.hpp"
#include "ctskills/scoring.hpp"
#include "ctskills/session.hpp"

namespace ctskills::codec {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr int kLogVersion = 1;
inline constexpr int kExportVersion = 1;
inline constexpr const char* kExportSchema = "ctskills.export";

ordered_json encode(const Element& element);
ordered_json encode(const scoring::Selection& selection);
ordered_json encode(const game::GameEvent& event);
ordered_json encode(const StudentProfile& profile);
ordered_json encode(const scoring::ScoreBreakdown& breakdown);
ordered_json encode(const SessionRecord& record);

// Elements are decoded against the cell's question kind: strings for item
// questions, [a, b] arrays for pair questions.
Element decode_element(const json& j, const instrument::QuestionSpec& spec);
scoring::Selection decode_selection(const json& j, const instrument::InstrumentConfig& config);
game::GameEvent decode_event(const json& j, const instrument::InstrumentConfig& config);
StudentProfile decode_profile(const json& j);
SessionRecord decode_record(const json& j, const instrument::InstrumentConfig& config);

// Header line of an export stream.
ordered_json export_header();
bool is_export_header(const json& j);

Timestamp decode_timestamp(const json& j, const char* what);

// Parses one line; throws Error(schema_violation) on malformed JSON.
json parse_line(const std::string& line);

}  // namespace ctskills::codec
