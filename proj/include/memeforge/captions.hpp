// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "memeforge/catalog.hpp"
#include "memeforge/gateway.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/prompts.hpp"

namespace memeforge {

inline constexpr std::size_t kMaxDescriptionChars = 2000;
inline constexpr std::size_t kMaxCaptionChars = 200;

struct ImageDescription {
  std::string template_id;
  std::string text;
  BackendKind backend_id = BackendKind::Stub;
  std::string created_at;
  std::string digest;  // SHA-256 of the template image bytes
  bool truncated = false;
};

struct CaptionPair {
  std::string top;
  std::optional<std::string> bottom;
  std::optional<std::string> rationale_text;

  bool operator==(const CaptionPair&) const = default;
};

nlohmann::json to_json(const CaptionPair& c);
CaptionPair caption_pair_from_json(const nlohmann::json& j);

enum class ParseOutcome { Parsed, Salvaged, Failed };
std::string_view to_string(ParseOutcome outcome);
ParseOutcome parse_outcome_from_string(std::string_view s);

struct ParseResult {
  ParseOutcome outcome = ParseOutcome::Failed;
  std::optional<CaptionPair> captions;  // present iff outcome != Failed
};

/// Extracts captions from model free text. Total: never throws.
///
/// Markers `Caption at top:` / `Caption at bottom:` are matched without
/// regard to case. A quoted caption runs to the last quote before the next
/// marker (so interior quotes survive); an unquoted one runs to the end of
/// its sentence or line and downgrades the outcome to Salvaged. Text before
/// the first marker is kept as rationale. A lone bottom caption is promoted
/// to top (Salvaged). No usable marker yields Failed.
ParseResult parse_captions(std::string_view raw_text);

/// Canonical marker syntax: `[rationale ]Caption at top: "<top>"[ and
/// Caption at bottom: "<bottom>"]`.
std::string render_marker_form(const CaptionPair& captions);

/// Thread-safe description store keyed by (template_id, image digest,
/// backend). Optionally persisted as JSONL
/// `{template_id, image_digest, backend_id, text}`.
class DescriptionCache {
 public:
  DescriptionCache() = default;
  /// Loads existing entries from `path` and appends new ones to it.
  explicit DescriptionCache(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& template_id,
                                 const std::string& image_digest,
                                 BackendKind backend) const;
  void put(const std::string& template_id, const std::string& image_digest,
           BackendKind backend, const std::string& text);
  std::size_t size() const;

  /// Mutex serializing describe calls for one key, so concurrent workers
  /// asking for the same cold key issue a single model request.
  std::shared_ptr<std::mutex> key_mutex(const std::string& template_id,
                                        const std::string& image_digest,
                                        BackendKind backend);

 private:
  using Key = std::tuple<std::string, std::string, BackendKind>;
  mutable std::shared_mutex mu_;
  std::map<Key, std::string> entries_;
  std::map<Key, std::shared_ptr<std::mutex>> key_locks_;
  std::unique_ptr<JsonlAppender> sink_;
};

/// Reads the template's image bytes (local file or http(s) URL).
/// Throws Error{FileMissing, ImageDecodeError}.
std::string load_template_image(const MemeTemplate& tmpl);

/// Returns the cached description when (template, image digest, backend)
/// matches; otherwise asks the VLM with kDescriptionPrompt and caches it.
/// Throws Error{CapabilityError, EmptyDescription} and gateway errors.
ImageDescription describe_template(const MemeTemplate& tmpl,
                                   const BackendConfig& vlm_config,
                                   ModelGateway& gateway,
                                   DescriptionCache& cache,
                                   int max_attempts = 3);

struct GenerationRecord {
  CampaignCell cell;
  std::string template_id;
  std::string prompt_digest;
  std::string raw_text;
  ParseOutcome parse_outcome = ParseOutcome::Failed;
  std::optional<CaptionPair> captions;
  int attempt = 0;
};

nlohmann::json to_json(const GenerationRecord& r);

/// Calls the model and parses its reply, re-asking up to `max_attempts`
/// times while the parse fails. `image` is attached for image-capable
/// backends. `request_id_prefix` makes request ids deterministic.
GenerationRecord generate_meme_text(const PromptBundle& bundle,
                                    const CampaignCell& cell,
                                    const std::string& template_id,
                                    const BackendConfig& config,
                                    ModelGateway& gateway, int max_attempts = 3,
                                    std::optional<ImageAttachment> image = {},
                                    const std::string& request_id_prefix = "gen");

}  // namespace memeforge
