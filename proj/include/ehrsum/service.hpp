#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ehrsum/backend.hpp"

namespace ehrsum::service {

inline constexpr std::size_t kMaxBodyBytes = 1 << 20;

struct ServiceConfig {
  backend::BackendConfig backend;
  std::optional<std::string> oracle_data;  // SQuAD file backing the Oracle backend
  std::string host = "0.0.0.0";
  int port = 8080;
  int max_concurrency = 4;
  // Extra allowed CORS origins; http://localhost:* and http://127.0.0.1:* are always allowed.
  std::vector<std::string> cors_origins;
};

struct SummarizeRequest {
  std::string context;
  std::string query;
};

struct SummarizeResponse {
  std::string summary;
  std::string question_used;
  double latency_ms = 0;
};

struct ApiError {
  int status = 400;
  std::string error;  // MissingField, InvalidField, ParseError, BackendUnavailable, Timeout, ...
  std::string message;
  std::optional<std::string> field;
};

// An HTTP status plus a JSON body.
struct Reply {
  int status = 200;
  std::string body;
};

std::string to_json(const SummarizeResponse& resp);
std::string to_json(const ApiError& err);

// Request handling without the socket layer. Stateless per request; the
// only shared state is the backend and a semaphore bounding concurrent
// generations.
class SummarizeService {
 public:
  SummarizeService(const backend::Backend& backend, int max_concurrency);

  std::variant<SummarizeResponse, ApiError> handle_summarize(const SummarizeRequest& req) const;
  // Decodes a raw POST body, then dispatches to handle_summarize.
  Reply handle_summarize_body(std::string_view body) const;
  // Always 200; "backend" reports readiness of the generation backend.
  Reply handle_health() const;

 private:
  const backend::Backend& backend_;
  mutable std::counting_semaphore<1024> slots_;
};

bool origin_allowed(std::string_view origin, const std::vector<std::string>& extra);

// Binds SummarizeService to POST /api/summarize and GET /api/health.
class HttpServer {
 public:
  HttpServer(const SummarizeService& service, ServiceConfig cfg);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port, or -1 on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ehrsum::service
