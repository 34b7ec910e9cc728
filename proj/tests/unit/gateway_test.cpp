// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <thread>

#include <gtest/gtest.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/gateway.hpp"
#include "memeforge/stub_server.hpp"
#include "test_support.hpp"

namespace memeforge {
namespace {

using namespace std::chrono_literals;
using nlohmann::json;

constexpr const char* kSecret = "sk-test-5f1e0c2d9a8b7766";

BackendConfig stub_config() {
  auto c = default_backend_config(BackendKind::Stub);
  c.endpoint_url = "http://stub.local/v1/chat/completions";
  return c;
}

struct Recorded {
  std::vector<std::chrono::milliseconds> sleeps;
};

GatewayOptions recording_options(Recorded& r) {
  GatewayOptions o;
  o.sleep = [&r](std::chrono::milliseconds d) { r.sleeps.push_back(d); };
  o.getenv = [](const std::string& name) -> std::optional<std::string> {
    if (name == "MEMEFORGE_TEST_KEY") return std::string(kSecret);
    return std::nullopt;
  };
  return o;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::IoError;
}

TEST(StubReply, PureAndModeSeparated) {
  EXPECT_EQ(stub_reply("x", StubMode::Caption), stub_reply("x", StubMode::Caption));
  EXPECT_NE(stub_reply("x", StubMode::Caption).find("Caption at top:"), std::string::npos);
  EXPECT_EQ(stub_reply("x", StubMode::Description).find("Caption at"), std::string::npos);
  EXPECT_NE(stub_reply("x", StubMode::Caption), stub_reply("y", StubMode::Caption));
  for (int i = 0; i < 200; ++i) {
    const auto p = "prompt " + std::to_string(i);
    EXPECT_NE(stub_reply(p, StubMode::Caption).find("Caption at top: \""), std::string::npos);
    EXPECT_EQ(stub_reply(p, StubMode::Description).find("Caption at"), std::string::npos);
  }
}

TEST(ModelGateway, StubPingIsDeterministic) {
  auto transport = std::make_shared<StubChatTransport>();
  ModelGateway gw(transport);
  auto a = gw.complete(stub_config(), {"ping", std::nullopt, "r1"});
  auto b = gw.complete(stub_config(), {"ping", std::nullopt, "r2"});
  EXPECT_EQ(a.raw_text, b.raw_text);
  EXPECT_EQ(a.raw_text, stub_reply("ping", StubMode::Caption));
  EXPECT_EQ(a.attempt_count, 1);
  EXPECT_EQ(a.backend_id, BackendKind::Stub);
}

TEST(ModelGateway, ImageToTextOnlyBackendIsCapabilityError) {
  auto transport = std::make_shared<StubChatTransport>();
  ModelGateway gw(transport);
  ModelRequest req{"describe", ImageAttachment{"image/png", "bytes"}, "r"};
  for (auto kind : {BackendKind::ChatGptLike, BackendKind::LlamaLike, BackendKind::Stub}) {
    auto c = default_backend_config(kind);
    c.endpoint_url = "http://stub.local/";
    EXPECT_EQ(code_of([&] { gw.complete(c, req); }), Errc::CapabilityError);
  }
  EXPECT_EQ(transport->calls(), 0);
  auto llava = default_backend_config(BackendKind::LlavaLike);
  llava.endpoint_url = "http://stub.local/";
  EXPECT_NO_THROW(gw.complete(llava, req));
  EXPECT_EQ(transport->calls_with_image(), 1);
}

TEST(ModelGateway, FailFirstTwoSucceedsOnThirdAttempt) {
  auto transport = std::make_shared<StubChatTransport>(StubBehavior{.fail_first = 2});
  Recorded rec;
  ModelGateway gw(transport, recording_options(rec));
  auto c = stub_config();
  c.max_retries = 3;
  auto r = gw.complete(c, {"ping", std::nullopt, "r"});
  EXPECT_EQ(r.attempt_count, 3);
  EXPECT_EQ(transport->calls(), 3);
  ASSERT_EQ(rec.sleeps.size(), 2u);
  EXPECT_LE(rec.sleeps[0], rec.sleeps[1]);
}

TEST(ModelGateway, RetryableStatusesAndTimeouts) {
  for (int status : {0, 408, 429, 500, 502, 503, 504}) {
    auto transport = std::make_shared<StubChatTransport>(
        StubBehavior{.fail_first = 1, .failure_status = status});
    Recorded rec;
    ModelGateway gw(transport, recording_options(rec));
    EXPECT_EQ(gw.complete(stub_config(), {"ping", std::nullopt, "r"}).attempt_count, 2)
        << status;
  }
}

TEST(ModelGateway, ExhaustedRetries) {
  auto c = stub_config();
  c.max_retries = 3;
  {
    auto t = std::make_shared<StubChatTransport>(StubBehavior{.fail_first = 100});
    Recorded rec;
    ModelGateway gw(t, recording_options(rec));
    EXPECT_EQ(code_of([&] { gw.complete(c, {"ping", std::nullopt, "r"}); }), Errc::Unavailable);
    EXPECT_EQ(t->calls(), c.max_retries + 1);
    ASSERT_EQ(rec.sleeps.size(), 3u);
    for (std::size_t i = 1; i < rec.sleeps.size(); ++i) EXPECT_LE(rec.sleeps[i - 1], rec.sleeps[i]);
  }
  {
    auto t = std::make_shared<StubChatTransport>(
        StubBehavior{.fail_first = 100, .failure_status = 0});
    Recorded rec;
    ModelGateway gw(t, recording_options(rec));
    EXPECT_EQ(code_of([&] { gw.complete(c, {"ping", std::nullopt, "r"}); }), Errc::Timeout);
  }
}

TEST(ModelGateway, AuthErrorIsNotRetried) {
  for (int status : {401, 403}) {
    auto t = std::make_shared<StubChatTransport>(
        StubBehavior{.fail_first = 100, .failure_status = status});
    Recorded rec;
    ModelGateway gw(t, recording_options(rec));
    EXPECT_EQ(code_of([&] { gw.complete(stub_config(), {"ping", std::nullopt, "r"}); }),
              Errc::AuthError);
    EXPECT_EQ(t->calls(), 1);
    EXPECT_TRUE(rec.sleeps.empty());
  }
}

TEST(ModelGateway, OtherClientErrorsAndBadBodiesAreProtocolErrors) {
  struct Fixed : Transport {
    HttpReply reply;
    HttpReply post(const std::string&, const HeaderList&, const std::string&,
                   const std::string&, std::chrono::milliseconds) override {
      return reply;
    }
  };
  for (HttpReply r : {HttpReply{400, "{}", false}, HttpReply{200, "not json", false},
                      HttpReply{200, R"({"choices":[]})", false},
                      HttpReply{200, R"({"choices":[{"message":{"content":7}}]})", false}}) {
    auto t = std::make_shared<Fixed>();
    t->reply = r;
    ModelGateway gw(t);
    EXPECT_EQ(code_of([&] { gw.complete(stub_config(), {"ping", std::nullopt, "r"}); }),
              Errc::ProtocolError)
        << r.body;
  }
}

// Transport that echoes the Authorization header back in its error bodies,
// the worst case for key leakage.
struct EchoingTransport : Transport {
  int status;
  explicit EchoingTransport(int s) : status(s) {}
  HttpReply post(const std::string&, const HeaderList& headers, const std::string&,
                 const std::string&, std::chrono::milliseconds) override {
    std::string auth;
    for (const auto& [k, v] : headers) {
      if (k == "Authorization") auth = v;
    }
    return {status, R"({"error":"bad key )" + auth + R"("})", false};
  }
};

TEST(ModelGateway, SecretNeverInErrorsOrLogs) {
  std::ostringstream log_text;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(log_text);
  auto logger = std::make_shared<spdlog::logger>("capture", sink);
  logger->set_level(spdlog::level::trace);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);

  auto c = stub_config();
  c.api_key_ref = "MEMEFORGE_TEST_KEY";
  c.max_retries = 2;
  std::string errors;
  for (int status : {401, 422, 503}) {
    Recorded rec;
    ModelGateway gw(std::make_shared<EchoingTransport>(status), recording_options(rec));
    try {
      gw.complete(c, {"ping", std::nullopt, "r"});
      ADD_FAILURE();
    } catch (const Error& e) {
      errors += e.what();
      errors += "\n";
    }
  }
  // The key does reach the transport as a bearer header.
  auto stub = std::make_shared<StubChatTransport>();
  Recorded rec;
  ModelGateway gw(stub, recording_options(rec));
  gw.complete(c, {"ping", std::nullopt, "r"});
  EXPECT_EQ(stub->last_authorization(), std::string("Bearer ") + kSecret);
  EXPECT_EQ(to_json(c).dump().find(kSecret), std::string::npos);

  logger->flush();
  spdlog::set_default_logger(previous);
  EXPECT_NE(errors.find("[redacted]"), std::string::npos);
  EXPECT_EQ(errors.find(kSecret), std::string::npos) << errors;
  EXPECT_FALSE(log_text.str().empty());
  EXPECT_EQ(log_text.str().find(kSecret), std::string::npos) << log_text.str();
}

TEST(BackoffDelay, NondecreasingAndCapped) {
  GatewayOptions o;
  o.initial_backoff = 100ms;
  o.backoff_multiplier = 2.0;
  o.max_backoff = 1000ms;
  EXPECT_EQ(backoff_delay(o, 1), 100ms);
  EXPECT_EQ(backoff_delay(o, 2), 200ms);
  EXPECT_EQ(backoff_delay(o, 4), 800ms);
  EXPECT_EQ(backoff_delay(o, 5), 1000ms);
  EXPECT_EQ(backoff_delay(o, 50), 1000ms);
  for (double mult : {0.5, 1.0, 1.5, 3.0}) {
    o.backoff_multiplier = mult;
    for (int i = 1; i < 30; ++i) EXPECT_LE(backoff_delay(o, i), backoff_delay(o, i + 1));
  }
}

TEST(ModelGateway, InFlightCapHolds) {
  struct Slow : Transport {
    std::atomic<int> now{0}, peak{0};
    HttpReply post(const std::string&, const HeaderList&, const std::string&,
                   const std::string& body, std::chrono::milliseconds) override {
      int n = ++now;
      int p = peak.load();
      while (n > p && !peak.compare_exchange_weak(p, n)) {
      }
      std::this_thread::sleep_for(5ms);
      --now;
      return handle_stub_chat(body, {}, nullptr);
    }
  };
  auto t = std::make_shared<Slow>();
  GatewayOptions o;
  o.max_in_flight = 3;
  ModelGateway gw(t, o);
  std::vector<std::jthread> threads;
  for (int i = 0; i < 12; ++i) {
    threads.emplace_back([&, i] {
      for (int j = 0; j < 4; ++j) gw.complete(stub_config(), {"p" + std::to_string(i), std::nullopt, "r"});
    });
  }
  threads.clear();
  EXPECT_LE(t->peak.load(), 3);
  EXPECT_LE(gw.peak_in_flight(), 3);
  EXPECT_GE(gw.peak_in_flight(), 2);
}

TEST(ModelGateway, ReplayRecordAndCassette) {
  testing::TempDir dir;
  GatewayOptions o;
  o.replay_path = dir / "replay.jsonl";
  {
    ModelGateway gw(std::make_shared<StubChatTransport>(), o);
    gw.complete(stub_config(), {"alpha", std::nullopt, "req-1"});
    gw.complete(stub_config(), {"beta", std::nullopt, "req-2"});
  }
  auto entries = load_replay(dir / "replay.jsonl");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].request_id, "req-1");
  EXPECT_EQ(entries[0].prompt_digest, sha256_hex("alpha"));
  EXPECT_EQ(entries[1].raw_text, stub_reply("beta", StubMode::Caption));

  ModelGateway replay(std::make_shared<ReplayTransport>(entries));
  EXPECT_EQ(replay.complete(stub_config(), {"alpha", std::nullopt, "x"}).raw_text,
            entries[0].raw_text);
  EXPECT_EQ(code_of([&] { replay.complete(stub_config(), {"gamma", std::nullopt, "x"}); }),
            Errc::ProtocolError);
}

TEST(ChatRequest, WireShape) {
  auto c = default_backend_config(BackendKind::LlavaLike);
  c.model_name = "llava-7b";
  auto plain = build_chat_request(c, {"hello", std::nullopt, "r"});
  EXPECT_EQ(plain["model"], "llava-7b");
  EXPECT_EQ(plain["messages"][0]["role"], "user");
  EXPECT_EQ(plain["messages"][0]["content"], "hello");
  EXPECT_EQ(plain["max_tokens"], 512);
  EXPECT_DOUBLE_EQ(plain["temperature"].get<double>(), 0.7);

  auto with_image = build_chat_request(c, {"look", ImageAttachment{"image/png", "abc"}, "r"});
  const auto& parts = with_image["messages"][0]["content"];
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0]["text"], "look");
  EXPECT_EQ(parts[1]["image_url"]["url"], "data:image/png;base64," + base64_encode("abc"));
  EXPECT_EQ(extract_prompt_text(with_image), "look");
}

TEST(BackendConfig, DefaultsAndValidation) {
  for (auto kind : {BackendKind::ChatGptLike, BackendKind::LlamaLike, BackendKind::LlavaLike,
                    BackendKind::Stub}) {
    auto c = default_backend_config(kind);
    EXPECT_EQ(c.image_capable, kind == BackendKind::LlavaLike);
    EXPECT_DOUBLE_EQ(c.temperature, 0.7);
    EXPECT_EQ(c.max_output_tokens, 512);
    EXPECT_EQ(c.max_retries, 3);
    EXPECT_EQ(c.timeout_ms, 60000);
    EXPECT_EQ(backend_kind_from_string(to_string(kind)), kind);
    EXPECT_EQ(backend_config_from_json(to_json(c)).model_name, c.model_name);
  }
  EXPECT_EQ(default_backend_config(BackendKind::ChatGptLike).display_name, "ChatGPT");
  EXPECT_EQ(code_of([] { backend_kind_from_string("gpt-5"); }), Errc::UnknownBackend);
  auto bad = stub_config();
  bad.temperature = 2.5;
  EXPECT_EQ(code_of([&] { validate(bad); }), Errc::ConfigError);
  bad = stub_config();
  bad.max_output_tokens = 0;
  EXPECT_EQ(code_of([&] { validate(bad); }), Errc::ConfigError);
  bad = stub_config();
  bad.max_retries = -1;
  EXPECT_EQ(code_of([&] { validate(bad); }), Errc::ConfigError);
}

TEST(HttpTransport, TalksToStubServer) {
  StubServerOptions opts;
  opts.chat.fail_first = 1;
  StubServer server(opts);
  const int port = server.start("127.0.0.1", 0);
  auto c = stub_config();
  c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  Recorded rec;
  ModelGateway gw(make_http_transport(), recording_options(rec));
  auto r = gw.complete(c, {"ping", std::nullopt, "r"});
  EXPECT_EQ(r.raw_text, stub_reply("ping", StubMode::Caption));
  EXPECT_EQ(r.attempt_count, 2);
  EXPECT_EQ(server.chat_calls(), 2);

  // Nothing listens on the next port: connection failure counts as timeout.
  server.stop();
  c.max_retries = 1;
  c.timeout_ms = 300;
  EXPECT_EQ(code_of([&] { gw.complete(c, {"ping", std::nullopt, "r"}); }), Errc::Timeout);
}

TEST(SplitUrl, OriginAndPath) {
  std::string origin, path;
  ASSERT_TRUE(split_url("https://api.example.com:8443/v1/chat", origin, path));
  EXPECT_EQ(origin, "https://api.example.com:8443");
  EXPECT_EQ(path, "/v1/chat");
  ASSERT_TRUE(split_url("http://host", origin, path));
  EXPECT_EQ(path, "/");
  EXPECT_FALSE(split_url("ftp://host/x", origin, path));
  EXPECT_FALSE(split_url("http:///x", origin, path));
}

}  // namespace
}  // namespace memeforge
