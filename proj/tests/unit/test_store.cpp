#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "../support/event_builder.hpp"
#include "../support/temp_dir.hpp"
#include "ctskills/codec.hpp"
#include "ctskills/error.hpp"
#include "ctskills/session_store.hpp"

using namespace ctskills;
using namespace ctskills::store;
using namespace testing_support;
using instrument::default_instrument;

namespace {

const auto& config() { return default_instrument(); }

// Deterministic clock: one millisecond per reading.
Clock ticking_clock(std::int64_t start_ms = 1709640000000) {
  auto counter = std::make_shared<std::atomic<std::int64_t>>(start_ms);
  return [counter] { return Timestamp{std::chrono::milliseconds{(*counter)++}}; };
}

StoreOptions options(const std::filesystem::path& dir = {}) {
  StoreOptions o;
  o.data_dir = dir;
  o.clock = ticking_clock();
  return o;
}

StudentProfile profile(std::string id, int grade = 4, int age = 10) {
  return StudentProfile{std::move(id), age, grade, Gender::female, "de", std::nullopt};
}

template <typename Fn>
ErrorCode error_code(Fn&& fn, std::optional<std::int64_t>* hint = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (hint) *hint = e.seq_hint();
    return e.code();
  }
  return ErrorCode::internal;
}

std::vector<game::GameEvent> slice(const std::vector<game::GameEvent>& events, std::size_t from, std::size_t to) {
  return {events.begin() + static_cast<std::ptrdiff_t>(from), events.begin() + static_cast<std::ptrdiff_t>(to)};
}

std::string export_text(const SessionStore& store, const ExportFilter& filter = {}) {
  std::ostringstream out;
  store.export_sessions(out, filter);
  return out.str();
}

int line_count(const std::string& text) { return static_cast<int>(std::count(text.begin(), text.end(), '\n')); }

}  // namespace

TEST_CASE("create_session validates and is idempotent") {
  SessionStore store(config(), options());
  auto first = store.create_session(profile("s1"));
  CHECK(first.created);
  CHECK(first.session_id == "s1");

  auto retry = store.create_session(profile("s1"));
  CHECK_FALSE(retry.created);
  CHECK(retry.session_id == "s1");
  CHECK(store.size() == 1);

  CHECK(error_code([&] { store.create_session(profile("s1", 5)); }) == ErrorCode::duplicate_session);
  CHECK(error_code([&] { store.create_session(profile("s2", 13)); }) == ErrorCode::grade_out_of_range);
  CHECK(error_code([&] { store.create_session(profile("s2", 3)); }) == ErrorCode::grade_out_of_range);
  CHECK(error_code([&] { store.create_session(profile("s2", 4, 2)); }) == ErrorCode::age_out_of_range);
  auto bad_language = profile("s2");
  bad_language.language = "not a tag";
  CHECK(error_code([&] { store.create_session(bad_language); }) == ErrorCode::invalid_profile);
  CHECK(error_code([&] { store.create_session(profile("has space")); }) == ErrorCode::invalid_profile);

  auto generated = store.create_session(profile(""));
  CHECK(generated.created);
  CHECK(generated.session_id.size() == 32);
  CHECK(store.contains(generated.session_id));

  CHECK(valid_language_tag("en-GB"));
  CHECK(valid_language_tag("gsw-CH"));
  CHECK_FALSE(valid_language_tag("e"));
}

TEST_CASE("append_events acknowledges, deduplicates and rejects gaps atomically") {
  SessionStore store(config(), options());
  store.create_session(profile("s-perfect"));
  const auto events = perfect_session(config()).events();

  auto ack = store.append_events("s-perfect", slice(events, 0, 10));
  CHECK(ack.ack_seq == 10);
  CHECK_FALSE(ack.duplicate);

  SUBCASE("gap") {
    std::optional<std::int64_t> hint;
    auto code = error_code([&] { store.append_events("s-perfect", slice(events, 11, 15)); }, &hint);
    CHECK(code == ErrorCode::seq_gap);
    CHECK(hint == 10);
    CHECK(store.last_seq("s-perfect") == 10);
  }
  SUBCASE("re-send of an acknowledged batch") {
    auto again = store.append_events("s-perfect", slice(events, 0, 10));
    CHECK(again.duplicate);
    CHECK(again.ack_seq == 10);
    CHECK(store.snapshot("s-perfect").events.size() == 10);
  }
  SUBCASE("overlapping batch appends only the new tail") {
    auto overlap = store.append_events("s-perfect", slice(events, 7, 12));
    CHECK(overlap.ack_seq == 12);
    CHECK(store.snapshot("s-perfect").events.size() == 12);
  }
  SUBCASE("different content at an acknowledged seq") {
    auto edited = slice(events, 9, 10);
    edited[0].at += std::chrono::seconds{5};
    CHECK(error_code([&] { store.append_events("s-perfect", edited); }) == ErrorCode::seq_conflict);
  }
  SUBCASE("a batch with an illegal event stores nothing") {
    auto batch = slice(events, 10, 14);
    batch[2].payload = game::InstancePayload{"apple_red#1"};
    batch[2].kind = game::EventKind::catch_object;
    std::optional<std::int64_t> hint;
    CHECK(error_code([&] { store.append_events("s-perfect", batch); }, &hint) == ErrorCode::replay_rejected);
    CHECK(hint == 13);
    CHECK(store.last_seq("s-perfect") == 10);
  }
  SUBCASE("non-contiguous batch") {
    auto batch = slice(events, 10, 14);
    batch.erase(batch.begin() + 1);
    CHECK(error_code([&] { store.append_events("s-perfect", batch); }) == ErrorCode::seq_gap);
  }
  SUBCASE("foreign session id") {
    auto batch = slice(events, 10, 11);
    batch[0].session_id = "other";
    CHECK(error_code([&] { store.append_events("s-perfect", batch); }) == ErrorCode::bad_request);
  }
  SUBCASE("unknown session") {
    CHECK(error_code([&] { store.append_events("nobody", slice(events, 0, 1)); }) == ErrorCode::unknown_session);
  }
  SUBCASE("server receipt time is recorded") {
    for (const auto& e : store.snapshot("s-perfect").events) CHECK(e.received_at.has_value());
  }
}

TEST_CASE("a finished session closes and refuses new events") {
  SessionStore store(config(), options());
  store.create_session(profile("s-perfect"));
  const auto events = perfect_session(config()).events();
  auto ack = store.append_events("s-perfect", events);
  CHECK(ack.closed);
  CHECK(store.snapshot("s-perfect").closed_at.has_value());

  auto retry = store.append_events("s-perfect", slice(events, events.size() - 3, events.size()));
  CHECK(retry.duplicate);

  auto extra = game::GameEvent{"s-perfect", ack.ack_seq + 1, events.back().at, std::nullopt,
                               game::EventKind::question_shown, game::ScreenPayload{{Question::Q1, 1}}};
  CHECK(error_code([&] { store.append_events("s-perfect", {extra}); }) == ErrorCode::session_closed);

  auto derived = store.derived("s-perfect");
  CHECK(derived.reports.size() == 12);
  REQUIRE(derived.aggregate.has_value());
  CHECK(*derived.aggregate == 5.0);
}

TEST_CASE("submit_answer appends a scored submission") {
  SessionStore store(config(), options());
  store.create_session(profile("s-perfect"));
  const auto events = perfect_session(config()).events();
  std::size_t first_question = 0;
  while (events[first_question].kind != game::EventKind::question_shown) ++first_question;
  store.append_events("s-perfect", slice(events, 0, first_question));

  const auto& q2 = instrument::spec_for(config(), Question::Q2, 1);
  scoring::Selection early{q2.cell, q2.targets, true, events[first_question].at};
  CHECK(error_code([&] { store.submit_answer("s-perfect", early); }) == ErrorCode::out_of_order_question);

  const auto& q1 = instrument::spec_for(config(), Question::Q1, 1);
  scoring::Selection answer{q1.cell, {ItemId("apple_red"), ItemId("rock")}, true, events[first_question].at};
  auto result = store.submit_answer("s-perfect", answer);
  CHECK(result.append.ack_seq == static_cast<std::int64_t>(first_question) + 1);
  CHECK(result.breakdown.raw_score == 1.0 - 4.0 - 1.0);
  CHECK(result.breakdown == scoring::score_selection(q1, answer));
  CHECK(store.snapshot("s-perfect").events.back().kind == game::EventKind::question_submitted);

  scoring::Selection wrong_kind{{Question::Q2, 1}, {ItemPair::make(ItemId("apple_red"), ItemId("grass"), false)}, true, {}};
  CHECK(error_code([&] { store.submit_answer("s-perfect", wrong_kind); }) == ErrorCode::kind_mismatch);
}

TEST_CASE("persistent store survives reopening and torn writes") {
  TempDir dir;
  const auto events = perfect_session(config()).events();
  SessionRecord acknowledged;
  {
    SessionStore store(config(), options(dir.path()));
    store.create_session(profile("s-perfect"));
    store.create_session(profile("s-other", 6, 12));
    store.append_events("s-perfect", slice(events, 0, 20));
    acknowledged = store.snapshot("s-perfect");
  }
  SUBCASE("clean reopen") {
    SessionStore store(config(), options(dir.path()));
    CHECK(store.size() == 2);
    CHECK(store.snapshot("s-perfect") == acknowledged);
  }
  SUBCASE("torn trailing lines are discarded") {
    {
      std::ofstream log(dir.path() / "sessions" / "s-perfect.jsonl", std::ios::app);
      log << R"({"v":1,"session_id":"s-perfect","seq":21,"at":"2024)";
      std::ofstream index(dir.path() / "index.jsonl", std::ios::app);
      index << R"({"v":1,"op":"create","session_id":"s-ha)";
    }
    SessionStore store(config(), options(dir.path()));
    CHECK(store.size() == 2);
    CHECK(store.snapshot("s-perfect") == acknowledged);
    // The log keeps accepting appends where the acknowledged prefix ended.
    CHECK(store.append_events("s-perfect", slice(events, 20, 25)).ack_seq == 25);
    SessionStore reopened(config(), options(dir.path()));
    CHECK(reopened.last_seq("s-perfect") == 25);
  }
}

TEST_CASE("crash after any acknowledged prefix replays to the acknowledged state") {
  const auto events = perfect_session(config()).events();
  TempDir dir;
  std::vector<SessionRecord> states;
  std::vector<std::uintmax_t> sizes;
  const auto log = dir.path() / "sessions" / "s-perfect.jsonl";
  {
    SessionStore store(config(), options(dir.path()));
    store.create_session(profile("s-perfect"));
    for (std::size_t i = 0; i < events.size(); i += 7) {
      store.append_events("s-perfect", slice(events, i, std::min(events.size(), i + 7)));
      states.push_back(store.snapshot("s-perfect"));
      sizes.push_back(std::filesystem::file_size(log));
    }
  }
  std::string full;
  {
    std::ifstream in(log, std::ios::binary);
    full.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto index = dir.path() / "index.jsonl";
  std::string index_text;
  {
    std::ifstream in(index, std::ios::binary);
    index_text.assign(std::istreambuf_iterator<char>(in), {});
  }
  // Keep only the create line so the close marker of the final state does not leak back.
  const auto create_only = index_text.substr(0, index_text.find('\n') + 1);
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    // Crash inside the first line of the (k+1)-th write.
    const auto cut = static_cast<std::size_t>(sizes[k] + 20);
    {
      std::ofstream out(log, std::ios::binary | std::ios::trunc);
      out << full.substr(0, cut);
      std::ofstream idx(index, std::ios::binary | std::ios::trunc);
      idx << create_only;
    }
    SessionStore store(config(), options(dir.path()));
    CAPTURE(k);
    CHECK(store.snapshot("s-perfect") == states[k]);
    // The client resends the unacknowledged batch.
    const auto next = states[k].events.size();
    auto ack = store.append_events("s-perfect", slice(events, next, std::min(events.size(), next + 7)));
    CHECK(static_cast<std::size_t>(ack.ack_seq) == states[k + 1].events.size());
  }
}

TEST_CASE("export and import") {
  SessionStore store(config(), options());
  store.create_session(profile("s-perfect", 4));
  store.create_session(profile("s-second", 6, 12));
  store.append_events("s-perfect", perfect_session(config()).events());
  store.append_events("s-second", slice(perfect_session(config(), "s-second").events(), 0, 9));

  const auto text = export_text(store);
  CHECK(line_count(text) == 3);
  CHECK(text.rfind(R"({"schema":"ctskills.export","v":1})", 0) == 0);

  SUBCASE("filters") {
    CHECK(line_count(export_text(store, {5, std::nullopt, std::nullopt})) == 1);
    CHECK(line_count(export_text(store, {6, std::nullopt, std::nullopt})) == 2);
    const auto created = store.snapshot("s-second").created_at;
    CHECK(line_count(export_text(store, {std::nullopt, created, std::nullopt})) == 2);
    CHECK(line_count(export_text(store, {std::nullopt, std::nullopt, created - std::chrono::milliseconds{1}})) == 2);
    CHECK(line_count(export_text(store, {std::nullopt, created, created})) == 2);
  }
  SUBCASE("round trip is byte-identical") {
    TempDir dir;
    {
      SessionStore target(config(), options(dir.path()));
      std::istringstream in(text);
      auto result = target.import_sessions(in);
      CHECK(result.accepted == 2);
      CHECK(result.errors.empty());
      CHECK(export_text(target) == text);
      CHECK(target.snapshot("s-perfect") == store.snapshot("s-perfect"));
    }
    SessionStore reopened(config(), options(dir.path()));
    CHECK(export_text(reopened) == text);
    // Importing again is a no-op.
    std::istringstream again(text);
    CHECK(reopened.import_sessions(again).accepted == 2);
    CHECK(export_text(reopened) == text);
  }
  SUBCASE("bad lines are reported and import continues") {
    auto records = [&] {
      std::istringstream in(text);
      return read_export(in, config());
    }();
    REQUIRE(records.size() == 2);
    auto divergent = records[1];
    divergent.profile.session_id = "s-divergent";
    for (auto& e : divergent.events) e.session_id = "s-divergent";
    divergent.events[3].kind = game::EventKind::drag;
    divergent.events[3].payload = game::DragPayload{"apple_red#1", {0, 0}, kGrass, instrument::DropZone::basket_red};

    std::ostringstream mixed;
    mixed << codec::export_header().dump() << "\n"
          << "{not json\n"
          << codec::encode(divergent).dump() << "\n"
          << codec::encode(records[0]).dump() << "\n";
    SessionStore target(config(), options());
    std::istringstream in(mixed.str());
    auto result = target.import_sessions(in);
    CHECK(result.accepted == 1);
    REQUIRE(result.errors.size() == 2);
    CHECK(result.errors[0].line == 2);
    CHECK(result.errors[0].code == ErrorCode::schema_violation);
    CHECK(result.errors[1].line == 3);
    CHECK(result.errors[1].code == ErrorCode::replay_rejected);
    CHECK(target.contains("s-perfect"));
    CHECK_FALSE(target.contains("s-divergent"));
  }
  SUBCASE("empty store exports the header only") {
    SessionStore empty(config(), options());
    CHECK(export_text(empty) == codec::export_header().dump() + "\n");
  }
}

TEST_CASE("concurrent sessions and exports") {
  SessionStore store(config(), StoreOptions{});
  constexpr int kSessions = 8;
  for (int i = 0; i < kSessions; ++i) store.create_session(profile("c" + std::to_string(i)));
  std::atomic<bool> done{false};
  std::thread exporter([&] {
    while (!done) {
      auto text = export_text(store);
      std::istringstream in(text);
      // Every snapshot is internally consistent.
      for (const auto& r : read_export(in, config())) REQUIRE(game::replay(config(), r.events).clean());
    }
  });
  std::vector<std::thread> writers;
  for (int i = 0; i < kSessions; ++i) {
    writers.emplace_back([&, i] {
      const auto id = "c" + std::to_string(i);
      const auto events = perfect_session(config(), id).events();
      for (std::size_t at = 0; at < events.size(); at += 3) {
        store.append_events(id, slice(events, at, std::min(events.size(), at + 3)));
      }
    });
  }
  for (auto& w : writers) w.join();
  done = true;
  exporter.join();
  for (int i = 0; i < kSessions; ++i) CHECK(store.snapshot("c" + std::to_string(i)).closed_at.has_value());
}
