// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/prompts.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

using json = nlohmann::json;

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::ChatGptLike: return "chatgpt-like";
    case BackendKind::LlamaLike: return "llama-like";
    case BackendKind::LlavaLike: return "llava-like";
    case BackendKind::Stub: return "stub";
  }
  return "stub";
}

BackendKind backend_kind_from_string(std::string_view id) {
  for (BackendKind k : {BackendKind::ChatGptLike, BackendKind::LlamaLike,
                        BackendKind::LlavaLike, BackendKind::Stub}) {
    if (to_string(k) == id) return k;
  }
  throw Error(Errc::UnknownBackend, "unknown backend '" + std::string(id) + "'");
}

BackendConfig default_backend_config(BackendKind kind) {
  BackendConfig c;
  c.backend_id = kind;
  switch (kind) {
    case BackendKind::ChatGptLike:
      c.endpoint_url = "https://api.openai.com/v1/chat/completions";
      c.model_name = "gpt-3.5-turbo";
      c.api_key_ref = "OPENAI_API_KEY";
      c.display_name = "ChatGPT";
      break;
    case BackendKind::LlamaLike:
      c.endpoint_url = "http://127.0.0.1:8000/v1/chat/completions";
      c.model_name = "llama-2-13b-chat";
      c.api_key_ref = "LLAMA_API_KEY";
      c.display_name = "LLaMA";
      break;
    case BackendKind::LlavaLike:
      c.endpoint_url = "http://127.0.0.1:8001/v1/chat/completions";
      c.model_name = "llava-v1.5-7b";
      c.api_key_ref = "LLAVA_API_KEY";
      c.image_capable = true;
      c.display_name = "LLaVA";
      break;
    case BackendKind::Stub:
      c.endpoint_url = "stub://chat";
      c.model_name = "stub";
      c.display_name = "Stub";
      break;
  }
  return c;
}

void validate(const BackendConfig& c) {
  static const std::regex kEnvName("[A-Za-z_][A-Za-z0-9_]*");
  if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) {
    throw Error(Errc::ConfigError, "temperature must be in [0, 2]");
  }
  if (c.max_output_tokens <= 0) throw Error(Errc::ConfigError, "max_output_tokens must be positive");
  if (c.timeout_ms <= 0) throw Error(Errc::ConfigError, "timeout_ms must be positive");
  if (c.max_retries < 0) throw Error(Errc::ConfigError, "max_retries must be >= 0");
  if (c.endpoint_url.empty()) throw Error(Errc::ConfigError, "endpoint_url is empty");
  if (!c.api_key_ref.empty() && !std::regex_match(c.api_key_ref, kEnvName)) {
    // Refuse anything that does not look like a variable name; it may be a
    // pasted secret. The value is deliberately not echoed.
    throw Error(Errc::ConfigError, "api_key_ref must name an environment variable");
  }
}

json to_json(const BackendConfig& c) {
  return {{"backend_id", to_string(c.backend_id)},
          {"endpoint_url", c.endpoint_url},
          {"model_name", c.model_name},
          {"api_key_ref", c.api_key_ref},
          {"temperature", c.temperature},
          {"max_output_tokens", c.max_output_tokens},
          {"timeout_ms", c.timeout_ms},
          {"max_retries", c.max_retries},
          {"image_capable", c.image_capable},
          {"display_name", c.display_name}};
}

BackendConfig backend_config_from_json(const json& j) {
  BackendConfig c =
      default_backend_config(backend_kind_from_string(j.at("backend_id").get<std::string>()));
  try {
    c.endpoint_url = j.value("endpoint_url", c.endpoint_url);
    c.model_name = j.value("model_name", c.model_name);
    c.api_key_ref = j.value("api_key_ref", c.api_key_ref);
    c.temperature = j.value("temperature", c.temperature);
    c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.image_capable = j.value("image_capable", c.image_capable);
    c.display_name = j.value("display_name", c.display_name);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("backend config: ") + e.what());
  }
  validate(c);
  return c;
}

bool split_url(const std::string& url, std::string& origin, std::string& path) {
  static const std::regex kUrl(R"(^(https?://[^/\s]+)(/[^\s]*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) return false;
  origin = m[1].str();
  path = m[2].matched ? m[2].str() : "/";
  return true;
}

HttpReply HttpTransport::post(const std::string& url, const HeaderList& headers,
                              const std::string& content_type,
                              const std::string& body,
                              std::chrono::milliseconds timeout) {
  std::string origin, path;
  if (!split_url(url, origin, path)) return {0, "invalid url", true};
  httplib::Client client(origin);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path, h, body, content_type);
  if (!res) return {0, httplib::to_string(res.error()), true};
  return {res->status, res->body, false};
}

std::optional<std::string> http_get(const std::string& url,
                                    std::chrono::milliseconds timeout) {
  std::string origin, path;
  if (!split_url(url, origin, path)) return std::nullopt;
  httplib::Client client(origin);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_follow_location(true);
  auto res = client.Get(path);
  if (!res || res->status < 200 || res->status >= 300) return std::nullopt;
  return res->body;
}

std::unique_ptr<Transport> make_http_transport() {
  return std::make_unique<HttpTransport>();
}

// ---------------------------------------------------------------------------
// Stub endpoint

namespace {

template <std::size_t N>
std::string_view pick(const std::string_view (&options)[N], std::uint64_t h,
                      int salt) {
  return options[(h >> (salt * 7)) % N];
}

// "highlights the X of Y to Support it." -> "X of Y"
std::string topic_from_prompt(std::string_view prompt) {
  constexpr std::string_view kLead = "highlights the ";
  std::size_t at = prompt.rfind(kLead);
  if (at == std::string_view::npos) return "the big issue of our time";
  std::size_t start = at + kLead.size();
  std::size_t end = prompt.find(" to ", start);
  if (end == std::string_view::npos || end - start > 80) return "the big issue of our time";
  return "the " + std::string(prompt.substr(start, end - start));
}

}  // namespace

std::string stub_reply(std::string_view prompt, StubMode mode) {
  const std::uint64_t h = fnv1a64(prompt);
  if (mode == StubMode::Description) {
    static constexpr std::string_view kSubjects[] = {
        "a man in a suit", "a cartoon dog", "a skeleton on a park bench",
        "two people shaking hands", "a surprised cat", "a child with a fist raised",
        "a woman pointing", "a crowd of people"};
    static constexpr std::string_view kSettings[] = {
        "in front of a plain wall", "outdoors on a sunny day", "in a dim office",
        "at a busy street corner", "in a living room", "on a stage"};
    static constexpr std::string_view kMoods[] = {
        "playful", "ironic", "tense", "cheerful", "deadpan", "exaggerated"};
    return "The image features " + std::string(pick(kSubjects, h, 0)) + " " +
           std::string(pick(kSettings, h, 1)) +
           ". The colors are bold and the framing leaves room for text above and below. "
           "The overall mood is " +
           std::string(pick(kMoods, h, 2)) + ".";
  }
  static constexpr std::string_view kUsages[] = {
      "exaggerate a simple contrast", "poke fun at wishful thinking",
      "point out an obvious irony", "react to a surprising fact",
      "show impatience with slow change"};
  static constexpr std::string_view kTops[] = {
      "When someone finally talks about", "Nobody:", "Me explaining",
      "That moment you realize", "They said it was fine, but"};
  static constexpr std::string_view kBottoms[] = {
      "and everyone suddenly has somewhere else to be",
      "turns out it was us all along", "still waiting for a real plan",
      "the receipts are in", "one small step at a time"};
  const std::string topic = topic_from_prompt(prompt);
  std::string out = std::string(kCotPrefix) + " The image is often used to " +
                    std::string(pick(kUsages, h, 0)) +
                    ". Let's use it for " + topic + ". Caption at top: \"" +
                    std::string(pick(kTops, h, 1)) + " " + topic + "\"";
  if ((h >> 40) % 4 != 0) {
    out += " and Caption at bottom: \"" + std::string(pick(kBottoms, h, 2)) + "\"";
  }
  return out;
}

std::string extract_prompt_text(const json& chat_request) {
  std::string out;
  const auto messages = chat_request.find("messages");
  if (messages == chat_request.end() || !messages->is_array()) return out;
  for (const auto& m : *messages) {
    if (!m.is_object() || m.value("role", "") != "user") continue;
    const auto content = m.find("content");
    if (content == m.end()) continue;
    if (content->is_string()) {
      out += content->get<std::string>();
    } else if (content->is_array()) {
      for (const auto& part : *content) {
        if (part.is_object() && part.value("type", "") == "text" &&
            part.contains("text") && part["text"].is_string()) {
          out += part["text"].get<std::string>();
        }
      }
    }
    break;
  }
  return out;
}

namespace {

bool request_has_image(const json& chat_request) {
  const auto messages = chat_request.find("messages");
  if (messages == chat_request.end() || !messages->is_array()) return false;
  for (const auto& m : *messages) {
    if (!m.is_object()) continue;
    const auto content = m.find("content");
    if (content == m.end() || !content->is_array()) continue;
    for (const auto& part : *content) {
      if (part.is_object() && part.value("type", "") == "image_url") return true;
    }
  }
  return false;
}

json chat_reply_json(const std::string& model, const std::string& text) {
  return {{"id", "stub-" + sha256_hex(text).substr(0, 12)},
          {"object", "chat.completion"},
          {"model", model},
          {"choices",
           json::array({{{"index", 0},
                         {"message", {{"role", "assistant"}, {"content", text}}},
                         {"finish_reason", "stop"}}})}};
}

}  // namespace

HttpReply handle_stub_chat(const std::string& body, const StubBehavior& behavior,
                           bool* had_image) {
  auto req = json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.is_object()) {
    return {400, R"({"error":{"message":"invalid JSON body"}})", false};
  }
  const std::string prompt = extract_prompt_text(req);
  if (had_image) *had_image = request_has_image(req);
  const bool describe = prompt.find(kDescriptionPrompt) != std::string::npos;
  std::string text;
  if (describe) {
    text = behavior.fixed_description.value_or(stub_reply(prompt, StubMode::Description));
  } else {
    text = behavior.fixed_reply.value_or(stub_reply(prompt, StubMode::Caption));
  }
  return {200, chat_reply_json(req.value("model", "stub"), text).dump(), false};
}

StubChatTransport::StubChatTransport(StubBehavior behavior)
    : behavior_(std::move(behavior)) {}

HttpReply StubChatTransport::post(const std::string&, const HeaderList& headers,
                                  const std::string&, const std::string& body,
                                  std::chrono::milliseconds) {
  const int n = ++calls_;
  {
    std::lock_guard lock(mu_);
    last_authorization_.clear();
    for (const auto& [k, v] : headers) {
      if (k == "Authorization") last_authorization_ = v;
    }
  }
  if (n <= behavior_.fail_first) {
    if (behavior_.failure_status == 0) return {0, "stub timeout", true};
    return {behavior_.failure_status, R"({"error":{"message":"stub failure"}})", false};
  }
  bool had_image = false;
  HttpReply reply = handle_stub_chat(body, behavior_, &had_image);
  if (had_image) ++image_calls_;
  return reply;
}

std::string StubChatTransport::last_authorization() const {
  std::lock_guard lock(mu_);
  return last_authorization_;
}

// ---------------------------------------------------------------------------
// Wire format

json build_chat_request(const BackendConfig& config, const ModelRequest& request) {
  json content;
  if (request.image) {
    content = json::array(
        {{{"type", "text"}, {"text", request.text_prompt}},
         {{"type", "image_url"},
          {"image_url",
           {{"url", "data:" + request.image->mime_type + ";base64," +
                        base64_encode(request.image->bytes)}}}}});
  } else {
    content = request.text_prompt;
  }
  return {{"model", config.model_name},
          {"messages", json::array({{{"role", "user"}, {"content", std::move(content)}}})},
          {"temperature", config.temperature},
          {"max_tokens", config.max_output_tokens}};
}

std::optional<std::string> parse_chat_reply(std::string_view body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const auto& first = (*choices)[0];
  if (!first.is_object()) return std::nullopt;
  auto message = first.find("message");
  if (message == first.end() || !message->is_object()) return std::nullopt;
  auto content = message->find("content");
  if (content == message->end() || !content->is_string()) return std::nullopt;
  return content->get<std::string>();
}

// ---------------------------------------------------------------------------
// Gateway

std::chrono::milliseconds backoff_delay(const GatewayOptions& options, int retry) {
  if (retry < 1) return std::chrono::milliseconds(0);
  const double base = static_cast<double>(options.initial_backoff.count());
  const double cap = static_cast<double>(options.max_backoff.count());
  const double mult = std::max(1.0, options.backoff_multiplier);
  const double d = std::min(cap, base * std::pow(mult, retry - 1));
  return std::chrono::milliseconds(static_cast<std::int64_t>(d));
}

ModelGateway::ModelGateway(std::shared_ptr<Transport> transport,
                           GatewayOptions options)
    : transport_(std::move(transport)),
      options_(std::move(options)),
      slots_(std::clamp(options_.max_in_flight, 1, 1024)) {
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (!options_.getenv) {
    options_.getenv = [](const std::string& name) -> std::optional<std::string> {
      const char* v = std::getenv(name.c_str());
      if (!v) return std::nullopt;
      return std::string(v);
    };
  }
  if (!options_.replay_path.empty()) {
    replay_ = std::make_unique<JsonlAppender>(options_.replay_path);
  }
}

std::string ModelGateway::resolve_key(const BackendConfig& config) const {
  if (config.api_key_ref.empty()) return {};
  return options_.getenv(config.api_key_ref).value_or("");
}

namespace {

std::string scrub(std::string text, const std::string& secret) {
  if (secret.empty()) return text;
  std::size_t pos = 0;
  while ((pos = text.find(secret, pos)) != std::string::npos) {
    text.replace(pos, secret.size(), "[redacted]");
    pos += 10;
  }
  return text;
}

std::string snippet(const std::string& body) {
  std::string s(text::utf8_prefix(body, 200));
  return text::collapse_whitespace(s);
}

class SlotGuard {
 public:
  SlotGuard(std::counting_semaphore<1024>& sem, std::atomic<int>& in_flight,
            std::atomic<int>& peak)
      : sem_(sem), in_flight_(in_flight) {
    sem_.acquire();
    int now = ++in_flight_;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
  }
  ~SlotGuard() {
    --in_flight_;
    sem_.release();
  }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<1024>& sem_;
  std::atomic<int>& in_flight_;
};

}  // namespace

ModelResponse ModelGateway::complete(const BackendConfig& config,
                                     const ModelRequest& request) {
  validate(config);
  if (request.image && !config.image_capable) {
    throw Error(Errc::CapabilityError, "backend " + std::string(to_string(config.backend_id)) +
                                           " does not accept images");
  }
  const std::string key = resolve_key(config);
  HeaderList headers;
  if (!key.empty()) headers.emplace_back("Authorization", "Bearer " + key);
  const std::string body = build_chat_request(config, request).dump();
  const auto timeout = std::chrono::milliseconds(config.timeout_ms);

  SlotGuard slot(slots_, in_flight_, peak_in_flight_);
  const auto started = std::chrono::steady_clock::now();
  bool last_timed_out = false;
  std::string last_detail;
  const int max_attempts = config.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    HttpReply reply = transport_->post(config.endpoint_url, headers,
                                       "application/json", body, timeout);
    bool transient = false;
    if (reply.timed_out || reply.status == 408) {
      transient = true;
      last_timed_out = true;
      last_detail = reply.timed_out ? "transport: " + reply.body : "HTTP 408";
    } else if (reply.status == 429 || reply.status >= 500) {
      transient = true;
      last_timed_out = false;
      last_detail = "HTTP " + std::to_string(reply.status);
    } else if (reply.status == 401 || reply.status == 403) {
      throw Error(Errc::AuthError,
                  scrub("request " + request.request_id + " rejected with HTTP " +
                            std::to_string(reply.status) + ": " + snippet(reply.body),
                        key));
    } else if (reply.status < 200 || reply.status >= 300) {
      throw Error(Errc::ProtocolError,
                  scrub("request " + request.request_id + " rejected with HTTP " +
                            std::to_string(reply.status) + ": " + snippet(reply.body),
                        key));
    } else {
      auto text = parse_chat_reply(reply.body);
      if (!text) {
        throw Error(Errc::ProtocolError,
                    scrub("request " + request.request_id +
                              ": unparsable reply: " + snippet(reply.body),
                          key));
      }
      ModelResponse response;
      response.raw_text = std::move(*text);
      response.attempt_count = attempt;
      response.backend_id = config.backend_id;
      response.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
      spdlog::debug("gateway request_id={} backend={} attempts={} latency_ms={}",
                    request.request_id, to_string(config.backend_id), attempt,
                    response.latency_ms);
      if (replay_) {
        replay_->append({{"request_id", request.request_id},
                         {"prompt_digest", sha256_hex(request.text_prompt)},
                         {"raw_text", response.raw_text}});
      }
      return response;
    }
    if (transient && attempt < max_attempts) {
      auto delay = backoff_delay(options_, attempt);
      spdlog::debug("gateway request_id={} attempt={} failed ({}); retrying in {} ms",
                    request.request_id, attempt, scrub(last_detail, key), delay.count());
      options_.sleep(delay);
    }
  }
  const std::string msg = scrub("request " + request.request_id + " failed after " +
                                    std::to_string(max_attempts) +
                                    " attempts: " + last_detail,
                                key);
  spdlog::warn("gateway {}", msg);
  throw Error(last_timed_out ? Errc::Timeout : Errc::Unavailable, msg);
}

// ---------------------------------------------------------------------------
// Replay

std::vector<ReplayEntry> load_replay(const std::filesystem::path& path) {
  std::vector<ReplayEntry> out;
  for (const auto& j : read_jsonl(path)) {
    out.push_back({j.value("request_id", ""), j.value("prompt_digest", ""),
                   j.value("raw_text", "")});
  }
  return out;
}

ReplayTransport::ReplayTransport(const std::vector<ReplayEntry>& entries) {
  for (const auto& e : entries) by_digest_[e.prompt_digest] = e.raw_text;
}

HttpReply ReplayTransport::post(const std::string&, const HeaderList&,
                                const std::string&, const std::string& body,
                                std::chrono::milliseconds) {
  auto req = json::parse(body, nullptr, false);
  if (req.is_discarded()) return {400, "{}", false};
  auto it = by_digest_.find(sha256_hex(extract_prompt_text(req)));
  if (it == by_digest_.end()) {
    return {404, R"({"error":{"message":"prompt not in cassette"}})", false};
  }
  return {200, chat_reply_json(req.value("model", "replay"), it->second).dump(), false};
}

}  // namespace memeforge
