// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <memory>
#include <set>
#include <string>

#include "memeforge/gateway.hpp"

namespace memeforge {

struct StubServerOptions {
  StubBehavior chat;
  /// Fixed classifier score; when empty the keyword stub scorer is used.
  std::optional<double> fixed_score;
  /// Template ids the overlay endpoint accepts; empty accepts all.
  std::set<std::string> known_templates;
};

/// Local HTTP server implementing the three external protocols used by the
/// pipeline, for integration tests and offline demos:
///   POST /v1/chat/completions  chat-completion JSON
///   POST /classify             {image_b64, text} -> {score}
///   POST /caption_image        form template_id,text0,text1 -> {url}
class StubServer {
 public:
  explicit StubServer(StubServerOptions options = {});
  ~StubServer();

  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void listen(const std::string& host, int port);
  void stop();

  int chat_calls() const;
  int classify_calls() const;
  int overlay_calls() const;
  /// Last form received by /caption_image as "template_id|text0|text1".
  std::string last_overlay_form() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace memeforge
