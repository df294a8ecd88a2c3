#include "ctskills/api.hpp"

#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "ctskills/codec.hpp"

namespace ctskills::api {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kJson = "application/json";

std::string_view text_key(Question q) {
  switch (q) {
    case Question::Q1: return "question.relevant_objects";
    case Question::Q2: return "question.moving_objects";
    case Question::Q3: return "question.changing_into";
    case Question::Q4: return "question.collisions";
  }
  return "";
}

ordered_json point(instrument::Point p) { return ordered_json::array({p.x, p.y}); }

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, ErrorCode code, const std::string& message,
                std::optional<std::int64_t> seq_hint = std::nullopt) {
  ordered_json body;
  body["code"] = to_string(code);
  body["message"] = message;
  body["seq_hint"] = seq_hint ? ordered_json(*seq_hint) : ordered_json(nullptr);
  send_json(res, status, body);
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::bad_request, std::string("malformed JSON body: ") + e.what());
  }
}

Timestamp parse_query_time(const std::string& text, bool end_of_day) {
  auto t = parse_timestamp(text);
  if (!t && text.size() == 10) t = parse_timestamp(text + (end_of_day ? "T23:59:59.999Z" : "T00:00:00.000Z"));
  if (!t) throw Error(ErrorCode::bad_request, "'" + text + "' is not an ISO-8601 date or timestamp");
  return *t;
}

std::optional<std::string> bearer(const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (header.rfind(prefix, 0) != 0) return std::nullopt;
  return header.substr(prefix.size());
}

}  // namespace

Environment environment_from_process() {
  Environment env;
  auto get = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = get("LISTEN_ADDR")) env.listen_addr = *v;
  if (auto v = get("DATA_DIR")) env.data_dir = *v;
  env.admin_token = get("ADMIN_TOKEN");
  if (auto v = get("INSTRUMENT_PATH")) env.instrument_path = *v;
  return env;
}

std::pair<std::string, int> parse_listen_addr(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0) throw Error(ErrorCode::bad_request, "listen address must be host:port");
  const auto host = addr.substr(0, colon);
  const auto port_text = addr.substr(colon + 1);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorCode::bad_request, "invalid port in listen address '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::bad_request, "port out of range in '" + addr + "'");
  return {host, port};
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::bad_request:
    case ErrorCode::schema_violation: return 400;
    case ErrorCode::unauthorized: return 401;
    case ErrorCode::not_found:
    case ErrorCode::unknown_session: return 404;
    case ErrorCode::duplicate_session:
    case ErrorCode::seq_gap:
    case ErrorCode::seq_conflict:
    case ErrorCode::session_closed:
    case ErrorCode::session_open:
    case ErrorCode::out_of_order_question: return 409;
    case ErrorCode::io_error:
    case ErrorCode::internal: return 500;
    default: return 422;
  }
}

ordered_json client_document(const instrument::InstrumentConfig& config) {
  ordered_json doc;
  doc["schema"] = "ctskills.instrument.client";
  doc["v"] = 1;
  doc["version"] = config.version;
  doc["name"] = config.name;
  doc["max_pair_slots"] = instrument::kPairSlots;
  doc["grades"] = ordered_json::array({config.grade_min, config.grade_max});
  auto& registry = doc["registry"] = ordered_json::array();
  for (const auto& id : config.registry) registry.push_back(id.str());
  auto& sceneries = doc["sceneries"] = ordered_json::array();
  for (const auto& scenery : config.sceneries) {
    ordered_json s;
    s["level"] = scenery.level;
    auto& objects = s["objects"] = ordered_json::array();
    for (const auto& o : scenery.objects) {
      ordered_json jo;
      jo["id"] = o.id;
      jo["item"] = o.item.str();
      jo["role"] = instrument::to_string(o.role);
      jo["home"] = point(o.home);
      jo["draggable"] = o.draggable;
      objects.push_back(std::move(jo));
    }
    auto& zones = s["zones"] = ordered_json::array();
    for (const auto& z : scenery.zones) {
      ordered_json jz;
      jz["zone"] = instrument::to_string(z.zone);
      jz["min"] = point(z.bounds.min);
      jz["max"] = point(z.bounds.max);
      zones.push_back(std::move(jz));
    }
    sceneries.push_back(std::move(s));
  }
  auto& questions = doc["questions"] = ordered_json::array();
  for (const auto& spec : config.question_specs) {
    ordered_json q;
    q["question"] = to_string(spec.cell.question);
    q["level"] = spec.cell.level;
    q["kind"] = instrument::to_string(spec.kind);
    q["text_key"] = text_key(spec.cell.question);
    q["pair_slots"] = spec.pair_kind() ? instrument::kPairSlots : 0;
    auto& palette = q["palette"] = ordered_json::array();
    for (const auto& id : spec.palette) palette.push_back(id.str());
    questions.push_back(std::move(q));
  }
  return doc;
}

std::string etag_of(const std::string& body) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : body) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "\"%016llx\"", static_cast<unsigned long long>(h));
  return buf;
}

struct Service::Impl {
  const instrument::InstrumentConfig& config;
  store::SessionStore& store;
  ServiceOptions options;
  // Rendered once: the served document is immutable for the process lifetime.
  std::string instrument_body;
  std::string instrument_etag;
  httplib::Server http;

  Impl(const instrument::InstrumentConfig& c, store::SessionStore& s, ServiceOptions o)
      : config(c), store(s), options(std::move(o)) {
    instrument_body = client_document(config).dump();
    instrument_etag = etag_of(instrument_body);
    routes();
  }

  bool is_admin(const httplib::Request& req) const {
    auto token = bearer(req);
    return options.admin_token && token && *token == *options.admin_token;
  }

  // Returns false after writing a 401/403 response.
  bool require_admin(const httplib::Request& req, httplib::Response& res) const {
    if (!options.admin_token) {
      send_error(res, 403, ErrorCode::unauthorized, "admin endpoints are disabled (no ADMIN_TOKEN configured)");
      return false;
    }
    if (!is_admin(req)) {
      send_error(res, 401, ErrorCode::unauthorized, "missing or invalid bearer token");
      return false;
    }
    return true;
  }

  template <typename Handler>
  httplib::Server::Handler guarded(Handler handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), e.code(), e.what(), e.seq_hint());
      } catch (const json::exception& e) {
        send_error(res, 400, ErrorCode::schema_violation, e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, ErrorCode::internal, e.what());
      }
    };
  }

  void routes() {
    http.Get("/v1/instrument", guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_header("ETag", instrument_etag);
      res.set_header("Cache-Control", "no-cache");
      if (req.get_header_value("If-None-Match") == instrument_etag) {
        res.status = 304;
        return;
      }
      res.status = 200;
      res.set_content(instrument_body, kJson);
    }));

    http.Post("/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      if (!body.is_object()) throw Error(ErrorCode::bad_request, "profile must be a JSON object");
      auto result = store.create_session(codec::decode_profile(body));
      ordered_json out;
      out["session_id"] = result.session_id;
      send_json(res, result.created ? 201 : 200, out);
    }));

    http.Post(R"(/v1/sessions/([^/]+)/events)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto body = parse_body(req);
      const json* list = &body;
      if (body.is_object() && body.contains("events")) list = &body["events"];
      if (!list->is_array()) throw Error(ErrorCode::bad_request, "body must be an event array or {\"events\": [...]}");
      std::vector<game::GameEvent> batch;
      for (auto e : *list) {
        if (e.is_object() && !e.contains("session_id")) e["session_id"] = id;
        batch.push_back(codec::decode_event(e, config));
      }
      auto ack = store.append_events(id, std::move(batch));
      ordered_json out;
      out["ack_seq"] = ack.ack_seq;
      out["duplicate"] = ack.duplicate;
      out["closed"] = ack.closed;
      send_json(res, 200, out);
    }));

    http.Post(R"(/v1/sessions/([^/]+)/answers)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      std::string mode = req.has_header("X-Assessment-Mode") ? req.get_header_value("X-Assessment-Mode") : "silent";
      if (mode != "silent" && mode != "student" && mode != "admin") {
        throw Error(ErrorCode::bad_request, "X-Assessment-Mode must be silent, student or admin");
      }
      if (mode == "admin" && !require_admin(req, res)) return;
      auto body = parse_body(req);
      if (!body.is_object()) throw Error(ErrorCode::bad_request, "selection must be a JSON object");
      if (!body.contains("submitted_at")) body["submitted_at"] = format_timestamp(store::system_now());
      if (!store.contains(id)) throw Error(ErrorCode::unknown_session, "unknown session " + id);
      auto result = store.submit_answer(id, codec::decode_selection(body, config));
      ordered_json out;
      out["ack_seq"] = result.append.ack_seq;
      out["closed"] = result.append.closed;
      if (mode == "student") {
        const auto& b = result.breakdown;
        out["question"] = to_string(b.cell.question);
        out["level"] = b.cell.level;
        out["attempted"] = b.attempted;
        out["selected"] = b.selected_targets + b.selected_nontargets + b.selected_optional;
      } else if (mode == "admin") {
        out["breakdown"] = codec::encode(result.breakdown);
      }
      send_json(res, 200, out);
    }));

    http.Get(R"(/v1/sessions/([^/]+)/report)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      auto record = store.snapshot(id);
      if (!record.closed_at && !is_admin(req)) {
        throw Error(ErrorCode::session_open, "report is available once the session is closed");
      }
      auto mode = scoring::AggregationMode::flat;
      if (req.has_param("aggregation")) {
        const auto a = req.get_param_value("aggregation");
        if (a == "per_question") mode = scoring::AggregationMode::per_question;
        else if (a != "flat") throw Error(ErrorCode::bad_request, "aggregation must be flat or per_question");
      }
      auto derived = derive(config, record, scoring::ScoringOptions::from(config), mode);
      ordered_json out;
      out["session_id"] = id;
      out["closed"] = record.closed_at.has_value();
      out["aggregate"] = derived.aggregate ? ordered_json(*derived.aggregate) : ordered_json(nullptr);
      auto& cells = out["cells"] = ordered_json::array();
      for (int ordinal = 0; ordinal < kCellCount; ++ordinal) {
        const Cell cell = Cell::from_ordinal(ordinal);
        scoring::ScoreBreakdown empty;
        empty.cell = cell;
        const scoring::ScoreBreakdown* found = &empty;
        for (const auto& r : derived.reports) {
          if (r.cell == cell) found = &r;
        }
        cells.push_back(codec::encode(*found));
      }
      send_json(res, 200, out);
    }));

    http.Get("/v1/admin/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!require_admin(req, res)) return;
      store::ExportFilter filter;
      if (req.has_param("grade") && !req.get_param_value("grade").empty()) {
        try {
          filter.grade = std::stoi(req.get_param_value("grade"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::bad_request, "grade must be an integer");
        }
      }
      if (req.has_param("from") && !req.get_param_value("from").empty()) {
        filter.from = parse_query_time(req.get_param_value("from"), false);
      }
      if (req.has_param("to") && !req.get_param_value("to").empty()) {
        filter.to = parse_query_time(req.get_param_value("to"), true);
      }
      std::ostringstream out;
      store.export_sessions(out, filter);
      res.status = 200;
      res.set_content(out.str(), "application/x-ndjson");
    }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.status == 404 && res.body.empty()) send_error(res, 404, ErrorCode::not_found, "no such endpoint");
    });
  }
};

Service::Service(const instrument::InstrumentConfig& config, store::SessionStore& store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(config, store, std::move(options))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::io_error, "cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::run() {
  if (!impl_->http.listen_after_bind()) throw Error(ErrorCode::io_error, "server stopped unexpectedly");
}

void Service::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

bool Service::running() const { return impl_->http.is_running(); }

}  // namespace ctskills::api
