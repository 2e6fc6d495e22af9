#include "ehrsum/service.hpp"

#include <algorithm>

#include "ehrsum/prompting.hpp"
#include "ehrsum/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ehrsum::service {
namespace {

using ordered_json = nlohmann::ordered_json;

int status_for(backend::BackendError::Kind kind) {
  return kind == backend::BackendError::Kind::Timeout ? 504 : 502;
}

ApiError missing_field(std::string field) {
  return {400, "MissingField", field + " is required", std::move(field)};
}

bool has_local_origin(std::string_view origin, std::string_view host) {
  if (!origin.starts_with(host)) return false;
  return origin.size() == host.size() || origin[host.size()] == ':';
}

}  // namespace

std::string to_json(const SummarizeResponse& resp) {
  ordered_json j;
  j["summary"] = resp.summary;
  j["question_used"] = resp.question_used;
  j["latency_ms"] = resp.latency_ms;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string to_json(const ApiError& err) {
  ordered_json j;
  j["error"] = err.error;
  if (err.field) j["field"] = *err.field;
  j["message"] = err.message;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

SummarizeService::SummarizeService(const backend::Backend& backend, int max_concurrency)
    : backend_(backend), slots_(std::clamp(max_concurrency, 1, 1024)) {}

std::variant<SummarizeResponse, ApiError> SummarizeService::handle_summarize(const SummarizeRequest& req) const {
  if (text::is_blank(req.context)) return missing_field("context");
  if (text::is_blank(req.query)) return missing_field("query");

  const auto query = prompting::topic_to_question(req.query);
  const auto input = prompting::format_model_input(query.normalized_question, req.context);

  backend::GenerationRequest gen;
  gen.input = input.text;
  try {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots_};
    auto out = backend_.generate(gen);
    return SummarizeResponse{std::move(out.output), query.normalized_question, out.latency_ms};
  } catch (const backend::BackendError& e) {
    return ApiError{status_for(e.kind()), std::string(backend::to_string(e.kind())), e.what(), std::nullopt};
  }
}

Reply SummarizeService::handle_summarize_body(std::string_view body) const {
  const auto j = ordered_json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return {400, to_json(ApiError{400, "ParseError", "request body must be a JSON object", std::nullopt})};
  }
  SummarizeRequest req;
  for (auto [key, dest] : {std::pair{"context", &req.context}, std::pair{"query", &req.query}}) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {400, to_json(missing_field(key))};
    if (!it->is_string()) {
      return {400, to_json(ApiError{400, "InvalidField", std::string(key) + " must be a string", std::string(key)})};
    }
    *dest = it->get<std::string>();
  }
  auto result = handle_summarize(req);
  if (auto* err = std::get_if<ApiError>(&result)) return {err->status, to_json(*err)};
  return {200, to_json(std::get<SummarizeResponse>(result))};
}

Reply SummarizeService::handle_health() const {
  const auto health = backend_.health_check();
  ordered_json j;
  j["service"] = "ok";
  j["backend"] = health.healthy ? "healthy" : "unhealthy";
  return {200, j.dump()};
}

bool origin_allowed(std::string_view origin, const std::vector<std::string>& extra) {
  if (has_local_origin(origin, "http://localhost") || has_local_origin(origin, "http://127.0.0.1")) return true;
  return std::any_of(extra.begin(), extra.end(), [&](const std::string& o) { return o == "*" || o == origin; });
}

struct HttpServer::Impl {
  const SummarizeService& service;
  ServiceConfig cfg;
  httplib::Server server;

  Impl(const SummarizeService& s, ServiceConfig c) : service(s), cfg(std::move(c)) {}
};

HttpServer::HttpServer(const SummarizeService& service, ServiceConfig cfg)
    : impl_(std::make_unique<Impl>(service, std::move(cfg))) {
  auto& srv = impl_->server;
  srv.set_payload_max_length(kMaxBodyBytes);

  Impl* impl = impl_.get();
  srv.set_post_routing_handler([impl](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (!origin.empty() && origin_allowed(origin, impl->cfg.cors_origins)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  srv.Post("/api/summarize", [impl](const httplib::Request& req, httplib::Response& res) {
    auto reply = impl->service.handle_summarize_body(req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.Get("/api/health", [impl](const httplib::Request&, httplib::Response& res) {
    auto reply = impl->service.handle_health();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      if (ep) std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(to_json(ApiError{500, "InternalError", message, std::nullopt}), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace ehrsum::service
