#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>

#include "ehrsum/dataset.hpp"

namespace ehrsum::backend {

enum class BackendKind { Http, Oracle, Fixed, Identity };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view name);

inline constexpr int kDefaultMaxNewTokens = 128;

struct BackendConfig {
  BackendKind kind = BackendKind::Oracle;
  std::optional<std::string> endpoint_url;  // required for Http, e.g. "http://127.0.0.1:8000"
  int timeout_ms = 30000;
  int max_retries = 2;
  std::optional<std::string> fixed_output;
  // First retry waits this long; each further retry doubles it.
  int backoff_initial_ms = 250;
};

// Throws std::invalid_argument describing the first broken invariant.
void validate(const BackendConfig& cfg);

struct GenerationRequest {
  std::string input;
  int max_new_tokens = kDefaultMaxNewTokens;
  std::string request_id;
};

struct GenerationResponse {
  std::string output;
  double latency_ms = 0;
  std::string backend_name;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { Timeout, BackendUnavailable, ProtocolError, OracleMiss };

  BackendError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(BackendError::Kind kind);

struct HealthStatus {
  bool healthy = true;
  std::string reason;
};

// Request/response bodies of the generation wire protocol.
std::string encode_generate_request(const GenerationRequest& req);
GenerationRequest decode_generate_request(std::string_view body);
std::string encode_generate_response(std::string_view output);
std::string decode_generate_response(std::string_view body);

// A configured generation backend. Immutable after construction and safe
// to share between threads; every Http call opens its own connection.
class Backend {
 public:
  // Oracle backends answer from `oracle_data`, keyed by exact
  // (question, context); the dataset is indexed at construction.
  explicit Backend(BackendConfig cfg, const dataset::SquadDataset* oracle_data = nullptr);

  GenerationResponse generate(const GenerationRequest& req) const;
  HealthStatus health_check() const;

  const BackendConfig& config() const { return cfg_; }
  std::string name() const;

 private:
  std::string generate_http(const GenerationRequest& req) const;
  std::string answer_from_oracle(std::string_view input) const;

  BackendConfig cfg_;
  std::unordered_map<std::string, std::string> oracle_;
};

}  // namespace ehrsum::backend
