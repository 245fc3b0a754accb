#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "pesao/recorder/service.hpp"

namespace pesao::recorder {

struct ApiOptions {
  int port = 8080;  // 0 picks a free port
  std::string bind = "0.0.0.0";
  /// Static console assets served under /ui. Missing: /ui answers 404.
  std::optional<std::filesystem::path> ui_root;
  std::chrono::milliseconds push_period{500};
};

/// HTTP + WebSocket front end for a RecorderService.
///
///   GET  /streams[?refresh=true]   POST /selection {selection}
///   POST /recording/start {selection, session}   POST /recording/stop
///   POST /notes {text}   POST /answers {trial_index, answer}
///   GET  /trials   POST /trials/generate {seed, conditions, repetitions}
///   POST /trials/mark {kind, trial_index}
///   GET  /status   WS /live   GET /ui/...
///
/// Errors are {"error": message} with 400 (bad request), 409 (state
/// conflict), 404, 405 or 503 (discovery failed).
class ApiServer {
 public:
  ApiServer(RecorderService& service, ApiOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  void start();
  void stop();
  [[nodiscard]] int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Pure request routing, shared by the server and unit tests.
struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};
ApiResponse handle_request(RecorderService& service, const std::string& method, const std::string& target,
                           const std::string& body, const std::optional<std::filesystem::path>& ui_root);

}  // namespace pesao::recorder
