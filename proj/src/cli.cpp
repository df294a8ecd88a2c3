#include "ctskills/cli.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctskills/analytics.hpp"
#include "ctskills/api.hpp"
#include "ctskills/codec.hpp"
#include "ctskills/error.hpp"
#include "ctskills/session_store.hpp"
#include "ctskills/simulate.hpp"

namespace ctskills::cli {

namespace {

// Raised for unreadable or malformed input files; maps to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool input_code(ErrorCode code) {
  return code == ErrorCode::bad_request || code == ErrorCode::schema_violation || code == ErrorCode::io_error;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

instrument::InstrumentConfig load_config(const std::string& path) {
  if (path.empty()) return instrument::default_instrument();
  try {
    return instrument::load_instrument(read_file(path));
  } catch (const Error& e) {
    if (input_code(e.code())) throw InputError(path + ": " + e.what());
    throw;
  }
}

std::string fixed(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", value);
  return buf;
}

std::string pad(std::string text, std::size_t width) {
  if (text.size() < width) text.insert(0, width - text.size(), ' ');
  return text;
}

// Sessions read from a per-session event log or from an export stream.
std::vector<SessionRecord> read_sessions(const std::string& path, const instrument::InstrumentConfig& config) {
  std::istringstream in(read_file(path));
  std::vector<SessionRecord> records;
  std::map<std::string, std::size_t> by_id;
  bool export_stream = false;
  bool first = true;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = codec::parse_line(line);
      if (first) {
        first = false;
        if (codec::is_export_header(j)) {
          if (j.value("v", 0) != codec::kExportVersion) throw Error(ErrorCode::schema_violation, "unsupported export version");
          export_stream = true;
          continue;
        }
      }
      if (export_stream) {
        records.push_back(codec::decode_record(j, config));
        continue;
      }
      auto event = codec::decode_event(j, config);
      auto [it, inserted] = by_id.try_emplace(event.session_id, records.size());
      if (inserted) {
        records.emplace_back();
        records.back().profile.session_id = event.session_id;
        records.back().created_at = event.at;
      }
      records[it->second].events.push_back(std::move(event));
    } catch (const Error& e) {
      throw InputError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void print_text(std::ostream& out, const SessionRecord& record, const DerivedSession& derived,
                const instrument::InstrumentConfig& config) {
  out << "session " << record.profile.session_id << "\n";
  out << "cell     X   Y  hit miss false  opt     raw     min  rescaled\n";
  for (const auto& r : derived.reports) {
    if (!r.attempted) continue;
    const auto counts = instrument::counts_of(instrument::spec_for(config, r.cell));
    out << to_string(r.cell) << std::string(r.cell.level < 10 ? 4 : 3, ' ') << pad(std::to_string(counts.targets), 2)
        << pad(std::to_string(counts.nontargets), 4) << pad(std::to_string(r.selected_targets), 5)
        << pad(std::to_string(r.missed_targets), 5) << pad(std::to_string(r.selected_nontargets), 6)
        << pad(std::to_string(r.selected_optional), 5) << pad(analytics::format_number(r.raw_score), 8)
        << pad(analytics::format_number(r.min_score), 8) << pad(fixed(*r.rescaled), 10) << "\n";
  }
  out << "aggregate " << (derived.aggregate ? fixed(*derived.aggregate) : "none") << "\n";
}

void print_json(std::ostream& out, const SessionRecord& record, const DerivedSession& derived) {
  nlohmann::ordered_json j;
  j["session_id"] = record.profile.session_id;
  j["aggregate"] = derived.aggregate ? nlohmann::ordered_json(*derived.aggregate) : nlohmann::ordered_json(nullptr);
  auto& cells = j["cells"] = nlohmann::ordered_json::array();
  for (const auto& r : derived.reports) {
    if (r.attempted) cells.push_back(codec::encode(r));
  }
  out << j.dump() << "\n";
}

struct ScoreArgs {
  std::string file;
  std::string min_mode;
  std::string aggregation = "flat";
  std::string instrument;
  bool json = false;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  auto config = load_config(a.instrument);
  if (!a.min_mode.empty()) config.min_score_mode = *instrument::parse_min_score_mode(a.min_mode);
  const auto mode = a.aggregation == "per_question" ? scoring::AggregationMode::per_question : scoring::AggregationMode::flat;
  const auto records = read_sessions(a.file, config);
  if (records.empty()) throw InputError(a.file + ": no sessions found");
  for (const auto& record : records) {
    auto derived = derive(config, record, scoring::ScoringOptions::from(config), mode);
    if (!derived.replay.clean()) {
      const auto& issue = derived.replay.issues.front();
      throw Error(ErrorCode::replay_rejected, "session " + record.profile.session_id + ": seq " +
                                                  std::to_string(issue.seq) + ": " + issue.message);
    }
    if (a.json) {
      print_json(out, record, derived);
    } else {
      print_text(out, record, derived, config);
    }
  }
  return kExitOk;
}

int cmd_analyze(const std::string& file, const std::string& dir, bool by_grade, const std::string& instrument_path,
                std::ostream& out) {
  const auto config = load_config(instrument_path);
  const auto records = read_sessions(file, config);
  const auto sessions = analytics::score_sessions(config, records);
  const auto written = analytics::write_tables(config, sessions, dir, by_grade);
  out << "analyzed " << sessions.size() << " sessions, wrote " << written.size() << " tables to " << dir << "\n";
  return kExitOk;
}

simulate::CohortProfile default_cohort() {
  simulate::CohortProfile p;
  for (int g = 4; g <= 9; ++g) p.grades.push_back({g, 0.4 + 0.1 * (g - 4), 0.1, 50});
  return p;
}

int cmd_simulate(int students, std::optional<std::uint64_t> seed, const std::string& profile_path,
                 const std::string& out_path, const std::string& instrument_path, std::ostream& out) {
  const auto config = load_config(instrument_path);
  simulate::CohortProfile profile;
  if (profile_path.empty()) {
    profile = default_cohort();
  } else {
    try {
      profile = simulate::parse_profile(read_file(profile_path));
    } catch (const Error& e) {
      throw InputError(profile_path + ": " + e.what());
    }
  }
  if (seed) profile.seed = *seed;
  if (students >= 0) simulate::set_total_students(profile, students);
  const auto records = simulate::simulate_cohort(config, profile);

  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write " + out_path);
  file << codec::export_header().dump() << "\n";
  for (const auto& r : records) file << codec::encode(r).dump() << "\n";
  file.close();
  if (!file) throw Error(ErrorCode::io_error, "write failed for " + out_path);
  out << "simulated " << records.size() << " sessions (seed " << profile.seed << ") into " << out_path << "\n";
  return kExitOk;
}

int cmd_validate(const std::string& instrument_path, std::ostream& out, std::ostream& err) {
  instrument::InstrumentConfig config;
  try {
    config = load_config(instrument_path);
  } catch (const Error& e) {
    err << "invalid instrument: " << e.what() << "\n";
    out << "FAIL\n";
    return kExitDomain;
  }
  const auto& reference = instrument::reference_counts();
  bool pass = true;
  out << "      L1      L2      L3\n";
  for (auto question : {Question::Q1, Question::Q2, Question::Q3, Question::Q4}) {
    out << to_string(question) << " ";
    for (int level = 1; level <= kLevelCount; ++level) {
      const Cell cell{question, level};
      const auto counts = instrument::counts_of(instrument::spec_for(config, cell));
      const bool ok = counts == reference[cell.ordinal()];
      pass = pass && ok;
      std::string entry = std::to_string(counts.targets) + "/" + std::to_string(counts.nontargets) + (ok ? "" : "*");
      out << pad(entry, 7) << " ";
    }
    out << "\n";
  }
  out << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitDomain;
}

Timestamp parse_time_option(const std::string& text, bool end_of_day) {
  auto t = parse_timestamp(text);
  if (!t && text.size() == 10) t = parse_timestamp(text + (end_of_day ? "T23:59:59.999Z" : "T00:00:00.000Z"));
  if (!t) throw InputError("'" + text + "' is not an ISO-8601 date or timestamp");
  return *t;
}

int cmd_export(const std::string& data_dir, const std::string& out_path, std::optional<int> grade, const std::string& from,
               const std::string& to, const std::string& instrument_path, std::ostream& out) {
  if (data_dir.empty()) throw InputError("export needs --data or DATA_DIR");
  const auto config = load_config(instrument_path);
  store::SessionStore store(config, store::StoreOptions{data_dir});
  store::ExportFilter filter;
  filter.grade = grade;
  if (!from.empty()) filter.from = parse_time_option(from, false);
  if (!to.empty()) filter.to = parse_time_option(to, true);
  if (out_path.empty() || out_path == "-") {
    store.export_sessions(out, filter);
    return kExitOk;
  }
  std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot write " + out_path);
  store.export_sessions(file, filter);
  return kExitOk;
}

int cmd_serve(const api::Environment& env, std::ostream& out) {
  const auto config = load_config(env.instrument_path);
  const auto [host, port] = api::parse_listen_addr(env.listen_addr);
  store::SessionStore store(config, store::StoreOptions{env.data_dir});
  api::Service service(config, store, api::ServiceOptions{env.admin_token});

  const int bound = service.bind(host, port);

  // Block the termination signals before the worker threads start so they
  // inherit the mask and a single waiter can stop the service cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  out << "listening on " << host << ":" << bound << " (" << store.size() << " sessions loaded)" << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.run();
  // run() can also return without a signal; wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Computational-thinking skills assessment: service, scoring and analytics", "ctskills"};
  app.require_subcommand(1, 1);
  const auto env = api::environment_from_process();

  std::string instrument_path = env.instrument_path;
  app.add_option("--instrument", instrument_path, "Instrument document (default: built-in)");

  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  auto serve_env = env;
  serve->add_option("--listen", serve_env.listen_addr, "host:port")->capture_default_str();
  serve->add_option("--data", serve_env.data_dir, "Data directory (empty: in memory)");
  serve->add_option("--instrument", instrument_path, "Instrument document");

  auto* score = app.add_subcommand("score", "Score a session log or export file offline");
  ScoreArgs score_args;
  score->add_option("file", score_args.file, "Event JSONL or export file")->required();
  score->add_option("--min-score-mode", score_args.min_mode)->check(CLI::IsMember({"achievable", "literal"}));
  score->add_option("--aggregation", score_args.aggregation)->check(CLI::IsMember({"flat", "per_question"}));
  score->add_flag("--json", score_args.json, "One JSON document per session");
  score->add_option("--instrument", instrument_path, "Instrument document");

  auto* analyze = app.add_subcommand("analyze", "Write the analytics tables for an export");
  std::string analyze_file, analyze_dir;
  bool by_grade = false;
  analyze->add_option("file", analyze_file, "Export file")->required();
  analyze->add_option("--out", analyze_dir, "Output directory")->required();
  analyze->add_flag("--by-grade", by_grade, "Split selection rates by grade");
  analyze->add_option("--instrument", instrument_path, "Instrument document");

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic cohort as an export file");
  int students = -1;
  std::optional<std::uint64_t> seed;
  std::string profile_path, sim_out;
  sim->add_option("--students", students, "Total students, spread over the profile's grades")->check(CLI::NonNegativeNumber);
  sim->add_option("--seed", seed, "Random seed (overrides the profile)");
  sim->add_option("--profile", profile_path, "Cohort profile JSON");
  sim->add_option("--out", sim_out, "Output export file")->required();
  sim->add_option("--instrument", instrument_path, "Instrument document");

  auto* validate = app.add_subcommand("validate", "Check an instrument's cell counts");
  validate->add_option("--instrument", instrument_path, "Instrument document");

  auto* exp = app.add_subcommand("export", "Write the stored sessions as an export stream");
  std::string export_data = env.data_dir, export_out, from, to;
  std::optional<int> grade;
  exp->add_option("--data", export_data, "Data directory");
  exp->add_option("--out", export_out, "Output file (default: standard output)");
  exp->add_option("--grade", grade);
  exp->add_option("--from", from, "Inclusive lower bound on created_at");
  exp->add_option("--to", to, "Inclusive upper bound on created_at");
  exp->add_option("--instrument", instrument_path, "Instrument document");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (serve->parsed()) {
      serve_env.instrument_path = instrument_path;
      return cmd_serve(serve_env, out);
    }
    if (score->parsed()) {
      score_args.instrument = instrument_path;
      return cmd_score(score_args, out);
    }
    if (analyze->parsed()) return cmd_analyze(analyze_file, analyze_dir, by_grade, instrument_path, out);
    if (sim->parsed()) return cmd_simulate(students, seed, profile_path, sim_out, instrument_path, out);
    if (validate->parsed()) return cmd_validate(instrument_path, out, err);
    if (exp->parsed()) return cmd_export(export_data, export_out, grade, from, to, instrument_path, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return input_code(e.code()) ? kExitInput : kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitInput;
}

}  // namespace ctskills::cli
