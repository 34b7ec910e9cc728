// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/jsonl.hpp"

namespace memeforge {

enum class BackendKind { ChatGptLike, LlamaLike, LlavaLike, Stub };

std::string_view to_string(BackendKind kind);
/// Throws Error{UnknownBackend}.
BackendKind backend_kind_from_string(std::string_view id);

struct BackendConfig {
  BackendKind backend_id = BackendKind::Stub;
  std::string endpoint_url;
  std::string model_name;
  /// Name of the environment variable that holds the API key. The key itself
  /// is never stored in configuration.
  std::string api_key_ref;
  double temperature = 0.7;
  int max_output_tokens = 512;
  int timeout_ms = 60'000;
  int max_retries = 3;
  /// Whether the backend accepts an image part. Defaults from the kind
  /// (only llava-like is image-capable) but may be overridden.
  bool image_capable = false;
  /// Label used in reports, e.g. "ChatGPT".
  std::string display_name;
};

BackendConfig default_backend_config(BackendKind kind);
/// Throws Error{ConfigError} on violated invariants.
void validate(const BackendConfig& config);
nlohmann::json to_json(const BackendConfig& config);
/// Missing fields take the kind's defaults.
BackendConfig backend_config_from_json(const nlohmann::json& j);

struct ImageAttachment {
  std::string mime_type = "image/png";
  std::string bytes;
};

struct ModelRequest {
  std::string text_prompt;
  std::optional<ImageAttachment> image;
  std::string request_id;
};

struct ModelResponse {
  std::string raw_text;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
  BackendKind backend_id = BackendKind::Stub;
};

/// Result of one HTTP exchange. `timed_out` marks transport timeouts and
/// connection failures, which are retried like 5xx.
struct HttpReply {
  int status = 0;
  std::string body;
  bool timed_out = false;
};

using HeaderList = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& url, const HeaderList& headers,
                         const std::string& content_type,
                         const std::string& body,
                         std::chrono::milliseconds timeout) = 0;
};

/// cpp-httplib backed transport for http:// and https:// endpoints.
class HttpTransport final : public Transport {
 public:
  HttpReply post(const std::string& url, const HeaderList& headers,
                 const std::string& content_type, const std::string& body,
                 std::chrono::milliseconds timeout) override;
};

std::unique_ptr<Transport> make_http_transport();

/// GET over http(s). Returns the body for 2xx replies, nullopt otherwise.
std::optional<std::string> http_get(const std::string& url,
                                    std::chrono::milliseconds timeout);

/// Splits "http://host:port/path" into origin and path. Returns false when
/// the URL has no http(s) scheme or host.
bool split_url(const std::string& url, std::string& origin, std::string& path);

enum class StubMode { Description, Caption };

/// Canned reply that is a pure function of (prompt, mode). Caption replies
/// carry a well-formed `Caption at top: "..."` segment; description replies
/// are one plain paragraph.
std::string stub_reply(std::string_view prompt, StubMode mode);

/// The fixed prompt used to describe template images.
inline constexpr std::string_view kDescriptionPrompt =
    "Describe this image in detail.";

struct StubBehavior {
  /// Number of leading requests answered with `failure_status` (0 = timeout).
  int fail_first = 0;
  int failure_status = 503;
  /// When set, every caption-mode reply is this text instead of stub_reply.
  std::optional<std::string> fixed_reply;
  /// When set, description-mode replies are this text.
  std::optional<std::string> fixed_description;
};

/// In-process chat-completion endpoint. Speaks the same JSON wire shape as a
/// real server, so the gateway's encode/decode path is exercised.
class StubChatTransport final : public Transport {
 public:
  explicit StubChatTransport(StubBehavior behavior = {});

  HttpReply post(const std::string& url, const HeaderList& headers,
                 const std::string& content_type, const std::string& body,
                 std::chrono::milliseconds timeout) override;

  int calls() const { return calls_.load(); }
  int calls_with_image() const { return image_calls_.load(); }
  std::string last_authorization() const;

 private:
  StubBehavior behavior_;
  std::atomic<int> calls_{0};
  std::atomic<int> image_calls_{0};
  mutable std::mutex mu_;
  std::string last_authorization_;
};

/// Shared handler used by both StubChatTransport and the stub HTTP server.
HttpReply handle_stub_chat(const std::string& body,
                           const StubBehavior& behavior, bool* had_image);

nlohmann::json build_chat_request(const BackendConfig& config,
                                  const ModelRequest& request);
/// Extracts choices[0].message.content. Returns nullopt on any shape error.
std::optional<std::string> parse_chat_reply(std::string_view body);

struct GatewayOptions {
  /// Global cap on concurrent in-flight requests.
  int max_in_flight = 4;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};
  /// Sleep hook; tests replace it to record delays without waiting.
  std::function<void(std::chrono::milliseconds)> sleep;
  /// Environment lookup hook for api keys (defaults to std::getenv).
  std::function<std::optional<std::string>(const std::string&)> getenv;
  /// When non-empty, every successful exchange is appended here as
  /// {request_id, prompt_digest, raw_text}.
  std::filesystem::path replay_path;
};

/// Delay before retry number `retry` (1-based): initial * multiplier^(retry-1),
/// capped. Nondecreasing in `retry`.
std::chrono::milliseconds backoff_delay(const GatewayOptions& options,
                                        int retry);

class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<Transport> transport,
               GatewayOptions options = {});

  /// Sends one request, retrying timeouts, 429 and 5xx with exponential
  /// backoff up to config.max_retries. Throws Error{Timeout, Unavailable,
  /// AuthError, ProtocolError, CapabilityError}. Error messages never
  /// contain the API key.
  ModelResponse complete(const BackendConfig& config,
                         const ModelRequest& request);

  int peak_in_flight() const { return peak_in_flight_.load(); }

 private:
  std::string resolve_key(const BackendConfig& config) const;

  std::shared_ptr<Transport> transport_;
  GatewayOptions options_;
  std::counting_semaphore<1024> slots_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_in_flight_{0};
  std::unique_ptr<JsonlAppender> replay_;
};

/// A recorded exchange from a replay file.
struct ReplayEntry {
  std::string request_id;
  std::string prompt_digest;
  std::string raw_text;
};

std::vector<ReplayEntry> load_replay(const std::filesystem::path& path);

/// Transport that answers from a replay file keyed by prompt digest, for
/// cassette-style tests. Unknown prompts get a 404.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const std::vector<ReplayEntry>& entries);

  HttpReply post(const std::string& url, const HeaderList& headers,
                 const std::string& content_type, const std::string& body,
                 std::chrono::milliseconds timeout) override;

 private:
  std::map<std::string, std::string> by_digest_;
};

/// Concatenates the text parts of the first user message of a chat request.
std::string extract_prompt_text(const nlohmann::json& chat_request);

}  // namespace memeforge
