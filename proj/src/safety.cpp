// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/safety.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

using json = nlohmann::json;

void validate(const SafetyConfig& config) {
  if (!(config.threshold >= 0.0 && config.threshold <= 1.0)) {
    throw Error(Errc::ConfigError, "safety threshold must lie in [0, 1]");
  }
  if (config.timeout_ms <= 0) throw Error(Errc::ConfigError, "timeout_ms must be positive");
}

json to_json(const SafetyVerdict& v) {
  json j = {{"score", v.score},
            {"flagged", v.flagged},
            {"threshold_used", v.threshold_used},
            {"classifier_id", v.classifier_id}};
  j["warning"] = v.warning ? json(*v.warning) : json(nullptr);
  return j;
}

SafetyVerdict safety_verdict_from_json(const json& j) {
  SafetyVerdict v;
  v.score = j.at("score").get<double>();
  v.flagged = j.at("flagged").get<bool>();
  v.threshold_used = j.at("threshold_used").get<double>();
  v.classifier_id = j.value("classifier_id", std::string{});
  if (j.contains("warning") && j["warning"].is_string()) {
    v.warning = j["warning"].get<std::string>();
  }
  return v;
}

std::string classifier_text(const CaptionPair& captions) {
  if (!captions.bottom || captions.bottom->empty()) return captions.top;
  return captions.top + " " + *captions.bottom;
}

// ---------------------------------------------------------------------------

HttpClassifier::HttpClassifier(std::shared_ptr<Transport> transport, SafetyConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {
  validate(config_);
}

double HttpClassifier::score(const std::string& image_bytes, const std::string& text) {
  const json body = {{"image_b64", base64_encode(image_bytes)}, {"text", text}};
  HttpReply reply = transport_->post(config_.classifier_url, {}, "application/json",
                                     body.dump(), std::chrono::milliseconds(config_.timeout_ms));
  if (reply.timed_out) throw Error(Errc::Unavailable, "classifier unreachable: " + reply.body);
  if (reply.status < 200 || reply.status >= 300) {
    throw Error(Errc::Unavailable, "classifier returned HTTP " + std::to_string(reply.status));
  }
  auto j = json::parse(reply.body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("score") || !j["score"].is_number()) {
    throw Error(Errc::ProtocolError, "classifier reply lacks a numeric score");
  }
  const double s = j["score"].get<double>();
  if (!(s >= 0.0 && s <= 1.0)) {
    throw Error(Errc::ProtocolError, "classifier score outside [0, 1]");
  }
  return s;
}

// ---------------------------------------------------------------------------

double stub_classifier_score(std::string_view text) {
  static constexpr std::string_view kKeywords[] = {
      "hate", "stupid", "idiot", "inferior", "disgusting", "kill",
      "vermin", "worthless", "subhuman", "trash", "scum", "deserve"};
  const std::string lower = text::to_lower_ascii(text);
  int hits = 0;
  for (std::string_view k : kKeywords) {
    if (lower.find(k) != std::string::npos) ++hits;
  }
  const double jitter = static_cast<double>(fnv1a64(text) % 5000) / 100000.0;
  return std::min(1.0, 0.35 * hits + jitter);
}

double StubClassifier::score(const std::string&, const std::string& text) {
  return stub_classifier_score(text);
}

ScheduledClassifier::ScheduledClassifier(std::vector<double> schedule)
    : schedule_(std::move(schedule)) {
  if (schedule_.empty()) throw Error(Errc::ConfigError, "empty score schedule");
}

double ScheduledClassifier::score(const std::string&, const std::string&) {
  const int n = calls_.fetch_add(1);
  return schedule_[static_cast<std::size_t>(n) % schedule_.size()];
}

// ---------------------------------------------------------------------------

SafetyVerdict score_meme(const std::string& image_bytes, const CaptionPair& captions,
                         const SafetyConfig& config, Classifier& classifier) {
  validate(config);
  SafetyVerdict v;
  v.threshold_used = config.threshold;
  v.classifier_id = classifier.id();
  try {
    v.score = classifier.score(image_bytes, classifier_text(captions));
    v.flagged = is_flagged(v.score, config.threshold);
  } catch (const Error& e) {
    if (config.fail_mode == FailMode::Closed) {
      v.score = 1.0;
      v.flagged = true;
      v.warning = std::string("classifier failed, rejecting: ") + e.what();
    } else {
      v.score = 0.0;
      v.flagged = false;
      v.warning = std::string("classifier failed, keeping: ") + e.what();
    }
    spdlog::warn("safety: {}", *v.warning);
  }
  return v;
}

double machine_hatefulness_rate(const std::vector<SafetyVerdict>& verdicts) {
  if (verdicts.empty()) throw Error(Errc::EmptyInput, "no verdicts");
  const auto flagged = std::count_if(verdicts.begin(), verdicts.end(),
                                     [](const SafetyVerdict& v) { return v.flagged; });
  return static_cast<double>(flagged) / static_cast<double>(verdicts.size());
}

}  // namespace memeforge
