// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/eval.hpp"

namespace memeforge {

struct SessionToken {
  std::string evaluator_id;
  std::string token;
  /// Unix seconds; empty means no expiry.
  std::optional<std::int64_t> expires_at;
};

struct ReviewConfig {
  std::vector<SessionToken> tokens;
  std::string admin_token;
  /// Directory holding <meme_id>.png files.
  std::filesystem::path image_dir;
  std::filesystem::path assignments_path;
  std::filesystem::path ratings_path;
  /// Manifest used for cause display names and per-cell progress.
  std::filesystem::path manifest_path;
  /// Optional static directory served at "/".
  std::optional<std::filesystem::path> ui_dir;
};

/// Tokens file: {"admin_token": "...", "evaluators": [{"evaluator_id",
/// "display_name", "token", "expires_at"?}]}.
ReviewConfig review_config_from_json(const nlohmann::json& j,
                                     const std::filesystem::path& base_dir);

struct ApiReply {
  int status = 200;
  nlohmann::json body;
};

/// Evaluation workflow behind the HTTP API. Thread-safe: reads take a shared
/// lock, rating writes are serialized through the ratings store.
class ReviewService {
 public:
  explicit ReviewService(ReviewConfig config,
                         std::function<std::int64_t()> clock = {});

  /// GET /api/task. Never serializes stance, technique, backend or safety.
  ApiReply next_task(const std::string& bearer) const;
  /// POST /api/rating.
  ApiReply submit_rating(const std::string& bearer, const std::string& body);
  /// GET /api/progress (admin token only).
  ApiReply progress(const std::string& bearer) const;
  /// GET /memes/<id>.png; empty when the id is unknown or has no image.
  std::optional<std::string> meme_image(const std::string& meme_id) const;

  std::vector<Rating> ratings() const { return store_.latest(); }
  const ReviewConfig& config() const { return config_; }

 private:
  std::optional<std::string> authenticate(const std::string& bearer) const;
  int remaining_for(const std::string& evaluator_id) const;

  ReviewConfig config_;
  std::function<std::int64_t()> clock_;
  std::vector<Assignment> assignments_;
  std::map<std::string, std::vector<std::size_t>> by_evaluator_;
  std::map<std::string, std::string> cause_display_;  // meme_id -> display
  std::map<std::string, std::string> cell_of_;        // meme_id -> cell label
  std::set<std::pair<std::string, std::string>> done_;  // (meme, evaluator)
  mutable std::shared_mutex mu_;
  RatingsStore store_;
};

/// Extracts the token from an "Authorization: Bearer <token>" value.
std::string bearer_token(std::string_view authorization_header);

/// Serves a ReviewService over HTTP on a background thread.
class ReviewServer {
 public:
  explicit ReviewServer(ReviewService& service);
  ~ReviewServer();

  /// Binds to host:port (port 0 picks a free port) and starts serving.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace memeforge
