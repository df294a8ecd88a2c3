#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "ctskills/game.hpp"
#include "ctskills/instrument.hpp"
#include "ctskills/scoring.hpp"
#include "ctskills/session.hpp"

namespace ctskills::store {

using Clock = std::function<Timestamp()>;

Timestamp system_now();

struct StoreOptions {
  // Empty path keeps everything in memory (tests, offline scoring).
  std::filesystem::path data_dir;
  int age_min = 5;
  int age_max = 25;
  Clock clock = system_now;
};

struct ExportFilter {
  std::optional<int> grade;
  std::optional<Timestamp> from;  // inclusive, on created_at
  std::optional<Timestamp> to;    // inclusive, on created_at
};

struct CreateResult {
  std::string session_id;
  bool created = false;  // false when an identical profile was already stored
};

struct AppendResult {
  std::int64_t ack_seq = 0;
  bool duplicate = false;  // the whole batch had already been acknowledged
  bool closed = false;
};

struct AnswerResult {
  AppendResult append;
  scoring::ScoreBreakdown breakdown;
};

struct ImportError {
  int line = 0;
  ErrorCode code = ErrorCode::schema_violation;
  std::string message;
};

struct ImportResult {
  int accepted = 0;
  std::vector<ImportError> errors;
};

// Validates an IETF-style language tag ("de", "en-GB", "gsw-CH").
bool valid_language_tag(std::string_view tag);
// Opaque ids are restricted to [A-Za-z0-9_-]{1,64}.
bool valid_token(std::string_view token);

// Append-only persistence of sessions.
//
// Layout under data_dir:
//   index.jsonl            one line per session creation / close
//   sessions/<id>.jsonl    the session's event log, one event per line
//
// Every acknowledged write has been flushed and fsync'ed. A torn trailing line
// (crash during a write that was never acknowledged) is discarded on open.
// Many sessions may be written concurrently; each session has one writer at a
// time and readers see consistent snapshots.
class SessionStore {
 public:
  SessionStore(const instrument::InstrumentConfig& config, StoreOptions options = {});
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  const instrument::InstrumentConfig& config() const { return config_; }

  CreateResult create_session(StudentProfile profile);

  // All-or-nothing. Events already stored with the same seq and content are
  // skipped so a retried batch is acknowledged again without duplication.
  AppendResult append_events(const std::string& session_id, std::vector<game::GameEvent> batch);

  // Appends a question_submitted event at the next seq and scores it.
  AnswerResult submit_answer(const std::string& session_id, const scoring::Selection& selection);

  void close_session(const std::string& session_id);

  bool contains(const std::string& session_id) const;
  SessionRecord snapshot(const std::string& session_id) const;
  DerivedSession derived(const std::string& session_id, scoring::AggregationMode mode = scoring::AggregationMode::flat) const;
  std::int64_t last_seq(const std::string& session_id) const;
  std::size_t size() const;

  // Writes the schema header line, then one session document per line,
  // ordered by (created_at, session_id).
  void export_sessions(std::ostream& out, const ExportFilter& filter = {}) const;
  ImportResult import_sessions(std::istream& in);

 private:
  struct Entry;

  std::shared_ptr<Entry> find(const std::string& session_id) const;
  void validate_profile(const StudentProfile& profile) const;
  AppendResult append_locked(Entry& entry, std::vector<game::GameEvent> batch);
  void close_locked(Entry& entry);
  void write_index(const std::string& line);
  void load();
  std::filesystem::path log_path(const std::string& session_id) const;
  bool persistent() const { return !options_.data_dir.empty(); }

  const instrument::InstrumentConfig& config_;
  StoreOptions options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mutex index_mutex_;
};

// Reads a whole export stream into records (no validation beyond schema).
std::vector<SessionRecord> read_export(std::istream& in, const instrument::InstrumentConfig& config);

}  // namespace ctskills::store
