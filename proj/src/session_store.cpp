#include "ctskills/session_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <regex>
#include <sstream>

#include "ctskills/codec.hpp"
#include "ctskills/error.hpp"

namespace ctskills::store {

namespace fs = std::filesystem;
using codec::json;
using codec::ordered_json;
using game::GameEvent;

struct SessionStore::Entry {
  std::mutex mutex;
  SessionRecord record;
  game::ReplayResult replay;
};

namespace {

[[noreturn]] void io_failure(const std::string& what, const fs::path& path) {
  throw Error(ErrorCode::io_error, what + " " + path.string() + ": " + std::strerror(errno));
}

// Appends data and fsyncs before returning.
void durable_append(const fs::path& path, std::string_view data) {
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot open", path);
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      io_failure("write failed on", path);
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    ::close(fd);
    io_failure("fsync failed on", path);
  }
  ::close(fd);
}

// Returns the complete lines of a file, truncating a torn trailing line.
std::vector<std::string> read_complete_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string content = buffer.str();
  auto last_newline = content.rfind('\n');
  std::size_t complete = last_newline == std::string::npos ? 0 : last_newline + 1;
  if (complete != content.size()) {
    in.close();
    if (::truncate(path.c_str(), static_cast<off_t>(complete)) != 0) io_failure("cannot truncate", path);
    content.resize(complete);
  }
  std::vector<std::string> lines;
  std::istringstream stream(content);
  for (std::string line; std::getline(stream, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::string generate_session_id() {
  std::random_device rd;
  std::uniform_int_distribution<unsigned> nibble(0, 15);
  std::string id;
  for (int i = 0; i < 32; ++i) id.push_back("0123456789abcdef"[nibble(rd)]);
  return id;
}

bool same_content(const GameEvent& a, const GameEvent& b) {
  return a.session_id == b.session_id && a.seq == b.seq && a.at == b.at && a.kind == b.kind && a.payload == b.payload;
}

std::string lines_of(const std::vector<GameEvent>& events) {
  std::string out;
  for (const auto& e : events) out += codec::encode(e).dump() + "\n";
  return out;
}

}  // namespace

Timestamp system_now() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

bool valid_language_tag(std::string_view tag) {
  static const std::regex pattern("^[A-Za-z]{2,3}(-[A-Za-z0-9]{2,8})*$");
  return std::regex_match(tag.begin(), tag.end(), pattern);
}

bool valid_token(std::string_view token) {
  return !token.empty() && token.size() <= 64 && std::all_of(token.begin(), token.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

SessionStore::SessionStore(const instrument::InstrumentConfig& config, StoreOptions options)
    : config_(config), options_(std::move(options)) {
  if (!options_.clock) options_.clock = system_now;
  if (persistent()) {
    std::error_code ec;
    fs::create_directories(options_.data_dir / "sessions", ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create data directory " + options_.data_dir.string());
    load();
  }
}

SessionStore::~SessionStore() = default;

fs::path SessionStore::log_path(const std::string& session_id) const {
  return options_.data_dir / "sessions" / (session_id + ".jsonl");
}

void SessionStore::write_index(const std::string& line) {
  if (!persistent()) return;
  std::lock_guard lock(index_mutex_);
  durable_append(options_.data_dir / "index.jsonl", line + "\n");
}

void SessionStore::load() {
  const auto index_lines = read_complete_lines(options_.data_dir / "index.jsonl");
  for (std::size_t i = 0; i < index_lines.size(); ++i) {
    const auto j = codec::parse_line(index_lines[i]);
    const std::string op = j.value("op", "");
    const std::string id = j.value("session_id", "");
    if (op == "create") {
      auto entry = std::make_shared<Entry>();
      entry->record.profile = codec::decode_profile(j.at("profile"));
      entry->record.created_at = codec::decode_timestamp(j.at("created_at"), "created_at");
      sessions_[id] = std::move(entry);
    } else if (op == "close") {
      auto it = sessions_.find(id);
      if (it == sessions_.end()) {
        throw Error(ErrorCode::io_error, "index line " + std::to_string(i + 1) + " closes unknown session " + id);
      }
      it->second->record.closed_at = codec::decode_timestamp(j.at("closed_at"), "closed_at");
    } else {
      throw Error(ErrorCode::io_error, "index line " + std::to_string(i + 1) + ": unknown op '" + op + "'");
    }
  }
  for (auto& [id, entry] : sessions_) {
    for (const auto& line : read_complete_lines(log_path(id))) {
      entry->record.events.push_back(codec::decode_event(codec::parse_line(line), config_));
    }
    entry->replay = game::replay(config_, entry->record.events);
    if (!entry->replay.clean()) {
      throw Error(ErrorCode::io_error, "stored log of session " + id + " does not replay: " +
                                           entry->replay.issues.front().message);
    }
  }
}

void SessionStore::validate_profile(const StudentProfile& profile) const {
  if (!valid_token(profile.session_id)) {
    throw Error(ErrorCode::invalid_profile, "session_id must match [A-Za-z0-9_-]{1,64}");
  }
  if (profile.grade < config_.grade_min || profile.grade > config_.grade_max) {
    throw Error(ErrorCode::grade_out_of_range, "grade " + std::to_string(profile.grade) + " outside " +
                                                   std::to_string(config_.grade_min) + ".." +
                                                   std::to_string(config_.grade_max));
  }
  if (profile.age < options_.age_min || profile.age > options_.age_max) {
    throw Error(ErrorCode::age_out_of_range, "age " + std::to_string(profile.age) + " outside " +
                                                 std::to_string(options_.age_min) + ".." +
                                                 std::to_string(options_.age_max));
  }
  if (!valid_language_tag(profile.language)) {
    throw Error(ErrorCode::invalid_profile, "language must be an IETF language tag");
  }
  if (profile.group && !valid_token(*profile.group)) {
    throw Error(ErrorCode::invalid_profile, "group must match [A-Za-z0-9_-]{1,64}");
  }
}

CreateResult SessionStore::create_session(StudentProfile profile) {
  if (profile.session_id.empty()) profile.session_id = generate_session_id();
  validate_profile(profile);
  std::unique_lock lock(map_mutex_);
  if (auto it = sessions_.find(profile.session_id); it != sessions_.end()) {
    std::lock_guard entry_lock(it->second->mutex);
    if (it->second->record.profile == profile) return {profile.session_id, false};
    throw Error(ErrorCode::duplicate_session, "session " + profile.session_id + " exists with another profile");
  }
  auto entry = std::make_shared<Entry>();
  entry->record.profile = profile;
  entry->record.created_at = options_.clock();
  ordered_json line;
  line["v"] = codec::kLogVersion;
  line["op"] = "create";
  line["session_id"] = profile.session_id;
  line["profile"] = codec::encode(profile);
  line["created_at"] = format_timestamp(entry->record.created_at);
  write_index(line.dump());
  if (persistent()) durable_append(log_path(profile.session_id), "");
  sessions_.emplace(profile.session_id, std::move(entry));
  return {profile.session_id, true};
}

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& session_id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::unknown_session, "unknown session " + session_id);
  return it->second;
}

AppendResult SessionStore::append_events(const std::string& session_id, std::vector<GameEvent> batch) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  for (auto& e : batch) {
    if (e.session_id.empty()) e.session_id = session_id;
    if (e.session_id != session_id) {
      throw Error(ErrorCode::bad_request, "event session_id does not match the session", e.seq);
    }
  }
  return append_locked(*entry, std::move(batch));
}

AppendResult SessionStore::append_locked(Entry& entry, std::vector<GameEvent> batch) {
  auto& events = entry.record.events;
  const std::int64_t last = events.empty() ? 0 : events.back().seq;
  for (std::size_t i = 1; i < batch.size(); ++i) {
    if (batch[i].seq != batch[i - 1].seq + 1) {
      throw Error(ErrorCode::seq_gap, "gap: batch is not contiguous at seq=" + std::to_string(batch[i].seq), last);
    }
  }
  // Drop the prefix that is already stored, provided it matches exactly.
  std::size_t fresh = 0;
  while (fresh < batch.size() && batch[fresh].seq <= last) {
    const auto& e = batch[fresh];
    if (e.seq < 1 || !same_content(events[static_cast<std::size_t>(e.seq - 1)], e)) {
      throw Error(ErrorCode::seq_conflict, "seq=" + std::to_string(e.seq) + " conflicts with the stored event", last);
    }
    ++fresh;
  }
  if (fresh == batch.size()) return {last, !batch.empty(), entry.record.closed_at.has_value()};
  if (entry.record.closed_at) throw Error(ErrorCode::session_closed, "session is closed", last);
  batch.erase(batch.begin(), batch.begin() + static_cast<std::ptrdiff_t>(fresh));
  if (batch.front().seq != last + 1) {
    throw Error(ErrorCode::seq_gap,
                "gap: expected seq=" + std::to_string(last + 1) + ", got seq=" + std::to_string(batch.front().seq),
                last);
  }

  auto replay = entry.replay;
  const auto known_issues = replay.issues.size();
  game::replay_into(config_, replay, batch);
  if (replay.issues.size() != known_issues) {
    const auto& issue = replay.issues[known_issues];
    auto code = issue.code == ErrorCode::illegal_event ? ErrorCode::replay_rejected : issue.code;
    throw Error(code, issue.message, issue.seq);
  }

  const auto now = options_.clock();
  for (auto& e : batch) e.received_at = now;
  if (persistent()) durable_append(log_path(entry.record.profile.session_id), lines_of(batch));
  events.insert(events.end(), batch.begin(), batch.end());
  entry.replay = std::move(replay);
  if (entry.replay.state.finished()) close_locked(entry);
  return {events.back().seq, false, entry.record.closed_at.has_value()};
}

AnswerResult SessionStore::submit_answer(const std::string& session_id, const scoring::Selection& selection) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  const auto& events = entry->record.events;
  GameEvent event;
  event.session_id = session_id;
  event.seq = events.empty() ? 1 : events.back().seq + 1;
  event.at = selection.submitted_at;
  if (!events.empty() && event.at < events.back().at) event.at = events.back().at;
  event.kind = game::EventKind::question_submitted;
  event.payload = selection;
  AnswerResult result;
  result.append = append_locked(*entry, {event});
  result.breakdown = scoring::score_selection(instrument::spec_for(config_, selection.cell), selection,
                                              scoring::ScoringOptions::from(config_));
  return result;
}

void SessionStore::close_locked(Entry& entry) {
  if (entry.record.closed_at) return;
  const auto now = options_.clock();
  ordered_json line;
  line["v"] = codec::kLogVersion;
  line["op"] = "close";
  line["session_id"] = entry.record.profile.session_id;
  line["closed_at"] = format_timestamp(now);
  write_index(line.dump());
  entry.record.closed_at = now;
}

void SessionStore::close_session(const std::string& session_id) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  close_locked(*entry);
}

bool SessionStore::contains(const std::string& session_id) const {
  std::shared_lock lock(map_mutex_);
  return sessions_.contains(session_id);
}

SessionRecord SessionStore::snapshot(const std::string& session_id) const {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  return entry->record;
}

DerivedSession SessionStore::derived(const std::string& session_id, scoring::AggregationMode mode) const {
  return derive(config_, snapshot(session_id), scoring::ScoringOptions::from(config_), mode);
}

std::int64_t SessionStore::last_seq(const std::string& session_id) const {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  return entry->record.events.empty() ? 0 : entry->record.events.back().seq;
}

std::size_t SessionStore::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

void SessionStore::export_sessions(std::ostream& out, const ExportFilter& filter) const {
  std::vector<std::shared_ptr<Entry>> entries;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& [id, entry] : sessions_) entries.push_back(entry);
  }
  std::vector<SessionRecord> records;
  for (const auto& entry : entries) {
    std::lock_guard lock(entry->mutex);
    const auto& r = entry->record;
    if (filter.grade && r.profile.grade != *filter.grade) continue;
    if (filter.from && r.created_at < *filter.from) continue;
    if (filter.to && r.created_at > *filter.to) continue;
    records.push_back(r);
  }
  std::sort(records.begin(), records.end(), [](const SessionRecord& a, const SessionRecord& b) {
    return std::tie(a.created_at, a.profile.session_id) < std::tie(b.created_at, b.profile.session_id);
  });
  out << codec::export_header().dump() << "\n";
  for (const auto& r : records) out << codec::encode(r).dump() << "\n";
}

ImportResult SessionStore::import_sessions(std::istream& in) {
  ImportResult result;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = codec::parse_line(line);
      if (codec::is_export_header(j)) {
        if (j.value("v", 0) != codec::kExportVersion) {
          throw Error(ErrorCode::schema_violation, "unsupported export version");
        }
        continue;
      }
      auto record = codec::decode_record(j, config_);
      validate_profile(record.profile);
      auto replay = game::replay(config_, record.events);
      if (!replay.clean()) {
        throw Error(ErrorCode::replay_rejected, "replay divergence: " + replay.issues.front().message,
                    replay.issues.front().seq);
      }
      std::unique_lock lock(map_mutex_);
      if (auto it = sessions_.find(record.profile.session_id); it != sessions_.end()) {
        std::lock_guard entry_lock(it->second->mutex);
        if (it->second->record == record) {
          ++result.accepted;
          continue;
        }
        throw Error(ErrorCode::duplicate_session, "session " + record.profile.session_id + " already stored");
      }
      ordered_json create;
      create["v"] = codec::kLogVersion;
      create["op"] = "create";
      create["session_id"] = record.profile.session_id;
      create["profile"] = codec::encode(record.profile);
      create["created_at"] = format_timestamp(record.created_at);
      write_index(create.dump());
      if (persistent()) durable_append(log_path(record.profile.session_id), lines_of(record.events));
      if (record.closed_at) {
        ordered_json close;
        close["v"] = codec::kLogVersion;
        close["op"] = "close";
        close["session_id"] = record.profile.session_id;
        close["closed_at"] = format_timestamp(*record.closed_at);
        write_index(close.dump());
      }
      auto entry = std::make_shared<Entry>();
      entry->record = std::move(record);
      entry->replay = std::move(replay);
      sessions_.emplace(entry->record.profile.session_id, std::move(entry));
      ++result.accepted;
    } catch (const Error& e) {
      result.errors.push_back({line_no, e.code(), e.what()});
    }
  }
  return result;
}

std::vector<SessionRecord> read_export(std::istream& in, const instrument::InstrumentConfig& config) {
  std::vector<SessionRecord> records;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = codec::parse_line(line);
      if (codec::is_export_header(j)) continue;
      records.push_back(codec::decode_record(j, config));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace ctskills::store
