// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/captions.hpp"
#include "memeforge/gateway.hpp"

namespace memeforge {

enum class FailMode { Closed, Open };

struct SafetyConfig {
  std::string classifier_url;
  double threshold = 0.9;
  FailMode fail_mode = FailMode::Closed;
  int timeout_ms = 30'000;
};

/// Throws Error{ConfigError} when threshold is outside [0, 1].
void validate(const SafetyConfig& config);

struct SafetyVerdict {
  double score = 0.0;
  bool flagged = false;  // score >= threshold_used
  double threshold_used = 0.9;
  std::string classifier_id;
  std::optional<std::string> warning;
};

/// The gate rule: at-threshold scores are flagged.
constexpr bool is_flagged(double score, double threshold) {
  return score >= threshold;
}

nlohmann::json to_json(const SafetyVerdict& v);
SafetyVerdict safety_verdict_from_json(const nlohmann::json& j);

/// Caption text as sent to the classifier: top and bottom joined by a space.
std::string classifier_text(const CaptionPair& captions);

/// A hatefulness scorer. Returns the hateful-class confidence in [0, 1] or
/// throws Error{ProtocolError, Unavailable} on failure.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual double score(const std::string& image_bytes,
                       const std::string& text) = 0;
  virtual std::string id() const = 0;
};

/// HTTP client for the classifier wire protocol: POST
/// `{image_b64, text}`, reply `{score}`.
class HttpClassifier final : public Classifier {
 public:
  HttpClassifier(std::shared_ptr<Transport> transport, SafetyConfig config);

  double score(const std::string& image_bytes,
               const std::string& text) override;
  std::string id() const override { return "http:" + config_.classifier_url; }

 private:
  std::shared_ptr<Transport> transport_;
  SafetyConfig config_;
};

/// Reference scorer: keyword hits push the score toward 1, a hash of the
/// text adds jitter in [0, 0.05). Pure function of the text.
double stub_classifier_score(std::string_view text);

class StubClassifier final : public Classifier {
 public:
  double score(const std::string& image_bytes,
               const std::string& text) override;
  std::string id() const override { return "stub-keywords"; }
};

/// Replays a fixed score sequence by call order (cycling); used to inject
/// known flag schedules. Thread-safe.
class ScheduledClassifier final : public Classifier {
 public:
  explicit ScheduledClassifier(std::vector<double> schedule);

  double score(const std::string& image_bytes,
               const std::string& text) override;
  std::string id() const override { return "stub-scheduled"; }
  int calls() const { return calls_.load(); }

 private:
  std::vector<double> schedule_;
  std::atomic<int> calls_{0};
};

/// Scores one meme. Classifier failures follow config.fail_mode: Closed
/// yields a flagged verdict (score 1), Open yields score 0; both record a
/// warning.
SafetyVerdict score_meme(const std::string& image_bytes,
                         const CaptionPair& captions,
                         const SafetyConfig& config, Classifier& classifier);

/// Partitions records into (kept, rejected) preserving input order.
template <typename Artifact>
std::pair<std::vector<Artifact>, std::vector<Artifact>> filter_batch(
    const std::vector<std::pair<Artifact, SafetyVerdict>>& records) {
  std::pair<std::vector<Artifact>, std::vector<Artifact>> out;
  for (const auto& [artifact, verdict] : records) {
    (verdict.flagged ? out.second : out.first).push_back(artifact);
  }
  return out;
}

/// Flagged count / total. Throws Error{EmptyInput}.
double machine_hatefulness_rate(const std::vector<SafetyVerdict>& verdicts);

}  // namespace memeforge
