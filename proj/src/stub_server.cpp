// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/stub_server.hpp"

#include <mutex>
#include <thread>

#include <httplib.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/safety.hpp"

namespace memeforge {

using json = nlohmann::json;

struct StubServer::Impl {
  StubServerOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<int> chat_calls{0};
  std::atomic<int> classify_calls{0};
  std::atomic<int> overlay_calls{0};
  mutable std::mutex mu;
  std::string last_form;

  explicit Impl(StubServerOptions o) : options(std::move(o)) {
    server.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++chat_calls;
      HttpReply reply;
      if (n <= options.chat.fail_first) {
        if (options.chat.failure_status == 0) {
          // A gateway timeout status stands in for a dropped connection.
          reply = {504, R"({"error":{"message":"stub timeout"}})", false};
        } else {
          reply = {options.chat.failure_status, R"({"error":{"message":"stub failure"}})", false};
        }
      } else {
        reply = handle_stub_chat(req.body, options.chat, nullptr);
      }
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    });

    server.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
      ++classify_calls;
      auto j = json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.contains("text") || !j["text"].is_string()) {
        res.status = 400;
        res.set_content(R"({"code":"bad_request","message":"expected {image_b64, text}"})",
                        "application/json");
        return;
      }
      const double score =
          options.fixed_score.value_or(stub_classifier_score(j["text"].get<std::string>()));
      res.set_content(json{{"score", score}}.dump(), "application/json");
    });

    server.Post("/caption_image", [this](const httplib::Request& req, httplib::Response& res) {
      ++overlay_calls;
      const std::string id = req.get_param_value("template_id");
      const std::string text0 = req.get_param_value("text0");
      const std::string text1 = req.get_param_value("text1");
      {
        std::lock_guard lock(mu);
        last_form = id + "|" + text0 + "|" + text1;
      }
      if (id.empty() ||
          (!options.known_templates.empty() && !options.known_templates.contains(id))) {
        res.status = 404;
        res.set_content(json{{"code", "unknown_template"},
                             {"message", "no template with id '" + id + "'"}}
                            .dump(),
                        "application/json");
        return;
      }
      const std::string key = sha256_hex(id + "\n" + text0 + "\n" + text1).substr(0, 16);
      res.set_content(json{{"url", "http://stub.invalid/memes/" + id + "/" + key + ".png"}}.dump(),
                      "application/json");
    });
  }
};

StubServer::StubServer(StubServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(options))) {}

StubServer::~StubServer() { stop(); }

int StubServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void StubServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(Errc::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void StubServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int StubServer::chat_calls() const { return impl_->chat_calls.load(); }
int StubServer::classify_calls() const { return impl_->classify_calls.load(); }
int StubServer::overlay_calls() const { return impl_->overlay_calls.load(); }

std::string StubServer::last_overlay_form() const {
  std::lock_guard lock(impl_->mu);
  return impl_->last_form;
}

}  // namespace memeforge
