#include "ehrsum/backend.hpp"

#include <chrono>
#include <thread>

#include "ehrsum/prompting.hpp"
#include "ehrsum/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ehrsum::backend {
namespace {

using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string oracle_key(std::string_view question, std::string_view context) {
  std::string key(question);
  key.push_back('\0');
  key.append(context);
  return key;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw std::invalid_argument("endpoint_url needs a scheme: " + std::string(url));
  if (url.substr(0, scheme_end) != "http") {
    throw std::invalid_argument("only http:// endpoints are supported: " + std::string(url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    e.prefix = std::string(url.substr(path_start));
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  }
  return e;
}

std::unique_ptr<httplib::Client> make_client(const Endpoint& e, int timeout_ms) {
  auto client = std::make_unique<httplib::Client>(e.origin);
  const std::chrono::milliseconds timeout(timeout_ms);
  client->set_connection_timeout(timeout);
  client->set_read_timeout(timeout);
  client->set_write_timeout(timeout);
  return client;
}

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Http: return "http";
    case BackendKind::Oracle: return "oracle";
    case BackendKind::Fixed: return "fixed";
    case BackendKind::Identity: return "identity";
  }
  return "";
}

std::optional<BackendKind> parse_backend_kind(std::string_view name) {
  const std::string key = text::to_lower_ascii(text::trim(name));
  if (key == "http") return BackendKind::Http;
  if (key == "oracle") return BackendKind::Oracle;
  if (key == "fixed") return BackendKind::Fixed;
  if (key == "identity") return BackendKind::Identity;
  return std::nullopt;
}

std::string_view to_string(BackendError::Kind kind) {
  switch (kind) {
    case BackendError::Kind::Timeout: return "Timeout";
    case BackendError::Kind::BackendUnavailable: return "BackendUnavailable";
    case BackendError::Kind::ProtocolError: return "ProtocolError";
    case BackendError::Kind::OracleMiss: return "OracleMiss";
  }
  return "";
}

void validate(const BackendConfig& cfg) {
  if (cfg.timeout_ms <= 0) throw std::invalid_argument("timeout_ms must be positive");
  if (cfg.max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
  if (cfg.backoff_initial_ms < 0) throw std::invalid_argument("backoff_initial_ms must be non-negative");
  if (cfg.kind == BackendKind::Http) {
    if (!cfg.endpoint_url || cfg.endpoint_url->empty()) throw std::invalid_argument("Http backend needs endpoint_url");
    split_endpoint(*cfg.endpoint_url);
  }
  if (cfg.kind == BackendKind::Fixed && !cfg.fixed_output) {
    throw std::invalid_argument("Fixed backend needs fixed_output");
  }
}

std::string encode_generate_request(const GenerationRequest& req) {
  ordered_json j;
  j["input"] = req.input;
  j["max_new_tokens"] = req.max_new_tokens;
  j["request_id"] = req.request_id;
  return j.dump();
}

GenerationRequest decode_generate_request(std::string_view body) {
  const auto j = ordered_json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("request body is not a JSON object");
  auto it = j.find("input");
  if (it == j.end() || !it->is_string()) throw std::invalid_argument("\"input\" must be a string");
  GenerationRequest req;
  req.input = it->get<std::string>();
  if (auto m = j.find("max_new_tokens"); m != j.end()) {
    if (!m->is_number_integer()) throw std::invalid_argument("\"max_new_tokens\" must be an integer");
    req.max_new_tokens = m->get<int>();
  }
  if (auto r = j.find("request_id"); r != j.end()) {
    if (!r->is_string()) throw std::invalid_argument("\"request_id\" must be a string");
    req.request_id = r->get<std::string>();
  }
  return req;
}

std::string encode_generate_response(std::string_view output) {
  ordered_json j;
  j["output"] = std::string(output);
  return j.dump();
}

std::string decode_generate_response(std::string_view body) {
  const auto j = ordered_json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw BackendError(BackendError::Kind::ProtocolError, "ProtocolError: response body is not a JSON object");
  }
  auto it = j.find("output");
  if (it == j.end() || !it->is_string()) {
    throw BackendError(BackendError::Kind::ProtocolError, "ProtocolError: response lacks string \"output\"");
  }
  return it->get<std::string>();
}

Backend::Backend(BackendConfig cfg, const dataset::SquadDataset* oracle_data) : cfg_(std::move(cfg)) {
  validate(cfg_);
  if (cfg_.kind != BackendKind::Oracle) return;
  if (oracle_data == nullptr) throw std::invalid_argument("Oracle backend needs a dataset");
  for (const auto& view : dataset::flatten(*oracle_data)) {
    if (view.qa->answers.empty()) continue;
    oracle_.try_emplace(oracle_key(view.qa->question, view.paragraph->context), view.qa->answers.front().text);
  }
}

std::string Backend::name() const {
  if (cfg_.kind == BackendKind::Http) return "http:" + *cfg_.endpoint_url;
  return std::string(to_string(cfg_.kind));
}

GenerationResponse Backend::generate(const GenerationRequest& req) const {
  if (req.input.empty()) throw std::invalid_argument("generation input is empty");
  if (req.max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
  const auto start = Clock::now();
  GenerationResponse resp;
  resp.backend_name = name();
  switch (cfg_.kind) {
    case BackendKind::Http:
      resp.output = generate_http(req);
      break;
    case BackendKind::Oracle:
      resp.output = answer_from_oracle(req.input);
      break;
    case BackendKind::Fixed:
      resp.output = *cfg_.fixed_output;
      break;
    case BackendKind::Identity:
      try {
        resp.output = prompting::parse_model_input(req.input).question;
      } catch (const prompting::PromptError& e) {
        throw BackendError(BackendError::Kind::ProtocolError, std::string("ProtocolError: ") + e.what());
      }
      break;
  }
  resp.latency_ms = elapsed_ms(start);
  return resp;
}

std::string Backend::answer_from_oracle(std::string_view input) const {
  prompting::ParsedPrompt parsed;
  try {
    parsed = prompting::parse_model_input(input);
  } catch (const prompting::PromptError& e) {
    throw BackendError(BackendError::Kind::OracleMiss, std::string("OracleMiss: ") + e.what());
  }
  auto it = oracle_.find(oracle_key(parsed.question, parsed.context));
  if (it == oracle_.end()) {
    throw BackendError(BackendError::Kind::OracleMiss, "OracleMiss: no QA matches question \"" + parsed.question + "\"");
  }
  return it->second;
}

std::string Backend::generate_http(const GenerationRequest& req) const {
  const Endpoint endpoint = split_endpoint(*cfg_.endpoint_url);
  const std::string path = endpoint.prefix + "/v1/generate";
  const std::string body = encode_generate_request(req);

  int backoff_ms = cfg_.backoff_initial_ms;
  for (int attempt = 0;; ++attempt) {
    auto client = make_client(endpoint, cfg_.timeout_ms);
    const auto sent = Clock::now();
    auto res = client->Post(path, body, "application/json");
    if (res) {
      if (res->status == 200) return decode_generate_response(res->body);
      if (res->status == 503) {
        throw BackendError(BackendError::Kind::BackendUnavailable, "BackendUnavailable: status 503");
      }
      throw BackendError(BackendError::Kind::ProtocolError,
                         "ProtocolError: status " + std::to_string(res->status) + ": " + res->body);
    }

    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                            elapsed_ms(sent) >= 0.9 * cfg_.timeout_ms);
    if (attempt >= cfg_.max_retries) {
      if (timed_out) {
        throw BackendError(BackendError::Kind::Timeout,
                           "Timeout: no response within " + std::to_string(cfg_.timeout_ms) + " ms after " +
                               std::to_string(attempt + 1) + " attempt(s)");
      }
      throw BackendError(BackendError::Kind::BackendUnavailable,
                         "BackendUnavailable: " + httplib::to_string(err) + " after " + std::to_string(attempt + 1) +
                             " attempt(s)");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
    backoff_ms *= 2;
  }
}

HealthStatus Backend::health_check() const {
  if (cfg_.kind != BackendKind::Http) return {};
  const Endpoint endpoint = split_endpoint(*cfg_.endpoint_url);
  auto client = make_client(endpoint, cfg_.timeout_ms);
  auto res = client->Get(endpoint.prefix + "/healthz");
  if (!res) {
    if (res.error() == httplib::Error::Connection) return {false, "connect refused"};
    return {false, httplib::to_string(res.error())};
  }
  if (res->status != 200) return {false, "status " + std::to_string(res->status)};
  return {};
}

}  // namespace ehrsum::backend
