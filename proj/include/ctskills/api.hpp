#pragma once

// HTTP/1.1 + JSON service in front of the session store.
//
//   POST /v1/sessions                   profile -> {session_id}
//   GET  /v1/instrument                 client document (no answer keys), ETag
//   POST /v1/sessions/{id}/events       event batch -> {ack_seq}
//   POST /v1/sessions/{id}/answers      selection -> ack / counts / breakdown
//   GET  /v1/sessions/{id}/report       aggregate + 12 cells
//   GET  /v1/admin/export               export stream (bearer token)
//
// Errors are {"code", "message", "seq_hint"} with codes from ErrorCode.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "ctskills/error.hpp"
#include "ctskills/instrument.hpp"
#include "ctskills/session_store.hpp"

namespace ctskills::api {

struct ServiceOptions {
  // Empty disables the admin endpoints (403).
  std::optional<std::string> admin_token;
};

// Environment configuration shared by the service and the CLI.
struct Environment {
  std::string listen_addr = "127.0.0.1:8080";
  std::string data_dir;
  std::optional<std::string> admin_token;
  std::string instrument_path;  // empty: built-in default instrument
};
Environment environment_from_process();

// host:port; throws bad_request on malformed input.
std::pair<std::string, int> parse_listen_addr(const std::string& addr);

// HTTP status used for each error code.
int http_status(ErrorCode code);

// The instrument as served to clients: palettes, sceneries, question text
// keys and pair slot counts, without targets or optional targets.
nlohmann::ordered_json client_document(const instrument::InstrumentConfig& config);

// 64-bit FNV-1a, quoted, as used for the instrument ETag.
std::string etag_of(const std::string& body);

class Service {
 public:
  Service(const instrument::InstrumentConfig& config, store::SessionStore& store, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and returns the port (0 picks a free one). Throws io_error.
  int bind(const std::string& host, int port = 0);
  // Blocks until stop() is called.
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ctskills::api
