// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/captions.hpp"

#include <algorithm>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

using json = nlohmann::json;

json to_json(const CaptionPair& c) {
  json j = {{"top", c.top}};
  j["bottom"] = c.bottom ? json(*c.bottom) : json(nullptr);
  j["rationale_text"] = c.rationale_text ? json(*c.rationale_text) : json(nullptr);
  return j;
}

CaptionPair caption_pair_from_json(const json& j) {
  CaptionPair c;
  c.top = j.at("top").get<std::string>();
  if (j.contains("bottom") && j["bottom"].is_string()) c.bottom = j["bottom"].get<std::string>();
  if (j.contains("rationale_text") && j["rationale_text"].is_string()) {
    c.rationale_text = j["rationale_text"].get<std::string>();
  }
  return c;
}

std::string_view to_string(ParseOutcome outcome) {
  switch (outcome) {
    case ParseOutcome::Parsed: return "Parsed";
    case ParseOutcome::Salvaged: return "Salvaged";
    case ParseOutcome::Failed: return "Failed";
  }
  return "Failed";
}

ParseOutcome parse_outcome_from_string(std::string_view s) {
  if (s == "Parsed") return ParseOutcome::Parsed;
  if (s == "Salvaged") return ParseOutcome::Salvaged;
  return ParseOutcome::Failed;
}

// ---------------------------------------------------------------------------
// Caption parsing

namespace {

constexpr std::string_view kTopMarker = "caption at top:";
constexpr std::string_view kBottomMarker = "caption at bottom:";
constexpr std::string_view kOpenCurly = "\xE2\x80\x9C";   // U+201C
constexpr std::string_view kCloseCurly = "\xE2\x80\x9D";  // U+201D

bool is_markdown(char c) { return c == '*' || c == '_' || c == '`' || c == '#'; }
bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string_view strip_leading_decoration(std::string_view s) {
  while (!s.empty() && (is_ws(s.front()) || is_markdown(s.front()))) s.remove_prefix(1);
  return s;
}

std::string_view strip_trailing_decoration(std::string_view s) {
  while (!s.empty() && (is_ws(s.back()) || is_markdown(s.back()))) s.remove_suffix(1);
  return s;
}

// Length of a quote character at the start of `s`, or 0.
std::size_t quote_at(std::string_view s) {
  if (s.starts_with('"')) return 1;
  if (s.starts_with(kOpenCurly) || s.starts_with(kCloseCurly)) return 3;
  return 0;
}

std::string_view strip_surrounding_quotes(std::string_view s) {
  for (;;) {
    std::size_t lead = quote_at(s);
    if (lead == 0) break;
    std::string_view rest = s.substr(lead);
    std::size_t trail = 0;
    if (rest.ends_with('"')) trail = 1;
    else if (rest.ends_with(kCloseCurly) || rest.ends_with(kOpenCurly)) trail = 3;
    if (trail == 0 || rest.size() < trail) break;
    s = text::trim(rest.substr(0, rest.size() - trail));
  }
  return s;
}

// Start of the last quote character in `s`, or npos.
std::size_t last_quote(std::string_view s) {
  std::size_t best = std::string_view::npos;
  std::size_t p = s.rfind('"');
  if (p != std::string_view::npos) best = p;
  for (std::string_view q : {kCloseCurly, kOpenCurly}) {
    std::size_t c = s.rfind(q);
    if (c != std::string_view::npos && (best == std::string_view::npos || c > best)) best = c;
  }
  return best;
}

// End of the first sentence or line in `s` (exclusive, keeping terminal
// punctuation).
std::size_t sentence_end(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\n' || c == '\r') return i;
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || is_ws(s[i + 1]))) {
      return i + 1;
    }
  }
  return s.size();
}

struct Capture {
  std::string text;
  bool clean = true;  // quoted and not truncated
};

std::optional<Capture> capture_caption(std::string_view segment) {
  std::string_view s = strip_leading_decoration(segment);
  Capture cap;
  std::string_view body;
  if (std::size_t open = quote_at(s); open != 0) {
    std::string_view after = s.substr(open);
    std::size_t close = last_quote(after);
    if (close != std::string_view::npos) {
      body = after.substr(0, close);
    } else {
      body = after.substr(0, sentence_end(after));
      cap.clean = false;
    }
  } else {
    body = s.substr(0, sentence_end(s));
    cap.clean = false;
  }
  std::string collapsed = text::collapse_whitespace(body);
  std::string_view v = strip_surrounding_quotes(text::trim(collapsed));
  v = strip_trailing_decoration(v);
  v = strip_leading_decoration(v);
  if (v.empty()) return std::nullopt;
  if (text::utf8_length(v) > kMaxCaptionChars) {
    v = text::trim(text::utf8_prefix(v, kMaxCaptionChars));
    cap.clean = false;
  }
  cap.text = std::string(v);
  return cap;
}

}  // namespace

ParseResult parse_captions(std::string_view raw) {
  ParseResult result;
  const std::size_t top_at = text::find_icase(raw, kTopMarker);
  const std::size_t bottom_at = text::find_icase(raw, kBottomMarker);
  if (top_at == std::string_view::npos && bottom_at == std::string_view::npos) {
    return result;
  }

  auto segment_after = [&](std::size_t marker_at, std::size_t marker_len) {
    const std::size_t start = marker_at + marker_len;
    std::size_t end = raw.size();
    for (std::string_view m : {kTopMarker, kBottomMarker}) {
      std::size_t next = text::find_icase(raw, m, start);
      if (next != std::string_view::npos) end = std::min(end, next);
    }
    return raw.substr(start, end - start);
  };

  std::optional<Capture> top, bottom;
  if (top_at != std::string_view::npos) {
    top = capture_caption(segment_after(top_at, kTopMarker.size()));
  }
  if (bottom_at != std::string_view::npos) {
    bottom = capture_caption(segment_after(bottom_at, kBottomMarker.size()));
  }

  CaptionPair pair;
  bool salvaged = false;
  if (top) {
    pair.top = std::move(top->text);
    salvaged = !top->clean;
    if (bottom) {
      pair.bottom = std::move(bottom->text);
      salvaged = salvaged || !bottom->clean;
    }
  } else if (bottom) {
    pair.top = std::move(bottom->text);
    salvaged = true;
  } else {
    return result;
  }

  const std::size_t first = std::min(top_at, bottom_at);
  std::string_view rationale = strip_trailing_decoration(text::trim(raw.substr(0, first)));
  if (!rationale.empty()) pair.rationale_text = std::string(rationale);

  result.outcome = salvaged ? ParseOutcome::Salvaged : ParseOutcome::Parsed;
  result.captions = std::move(pair);
  return result;
}

std::string render_marker_form(const CaptionPair& c) {
  std::string out;
  if (c.rationale_text) out += *c.rationale_text + " ";
  out += "Caption at top: \"" + c.top + "\"";
  if (c.bottom) out += " and Caption at bottom: \"" + *c.bottom + "\"";
  return out;
}

// ---------------------------------------------------------------------------
// Description cache

DescriptionCache::DescriptionCache(const std::filesystem::path& path) {
  for (const auto& j : read_jsonl(path)) {
    try {
      entries_[{j.at("template_id").get<std::string>(), j.at("image_digest").get<std::string>(),
                backend_kind_from_string(j.at("backend_id").get<std::string>())}] =
          j.at("text").get<std::string>();
    } catch (const std::exception&) {
      // Unreadable entries are ignored; they will be regenerated.
    }
  }
  sink_ = std::make_unique<JsonlAppender>(path);
}

std::optional<std::string> DescriptionCache::get(const std::string& template_id,
                                                 const std::string& image_digest,
                                                 BackendKind backend) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find({template_id, image_digest, backend});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DescriptionCache::put(const std::string& template_id, const std::string& image_digest,
                           BackendKind backend, const std::string& text) {
  {
    std::unique_lock lock(mu_);
    entries_[{template_id, image_digest, backend}] = text;
  }
  if (sink_) {
    sink_->append({{"template_id", template_id},
                   {"image_digest", image_digest},
                   {"backend_id", to_string(backend)},
                   {"text", text}});
  }
}

std::shared_ptr<std::mutex> DescriptionCache::key_mutex(const std::string& template_id,
                                                        const std::string& image_digest,
                                                        BackendKind backend) {
  std::unique_lock lock(mu_);
  auto& m = key_locks_[{template_id, image_digest, backend}];
  if (!m) m = std::make_shared<std::mutex>();
  return m;
}

std::size_t DescriptionCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------

std::string load_template_image(const MemeTemplate& tmpl) {
  if (!tmpl.is_remote()) return read_file(tmpl.image_path);
  auto body = http_get(tmpl.image_ref, std::chrono::seconds(30));
  if (!body) throw Error(Errc::FileMissing, "cannot fetch " + tmpl.image_ref);
  return *body;
}

namespace {

std::string sniff_mime(std::string_view bytes) {
  if (bytes.starts_with("\x89PNG")) return "image/png";
  if (bytes.starts_with("\xFF\xD8")) return "image/jpeg";
  if (bytes.starts_with("GIF8")) return "image/gif";
  return "application/octet-stream";
}

}  // namespace

ImageDescription describe_template(const MemeTemplate& tmpl, const BackendConfig& vlm_config,
                                   ModelGateway& gateway, DescriptionCache& cache,
                                   int max_attempts) {
  if (!vlm_config.image_capable) {
    throw Error(Errc::CapabilityError, "description backend " +
                                           std::string(to_string(vlm_config.backend_id)) +
                                           " is not image-capable");
  }
  const std::string bytes = load_template_image(tmpl);
  ImageDescription desc;
  desc.template_id = tmpl.template_id;
  desc.backend_id = vlm_config.backend_id;
  desc.digest = sha256_hex(bytes);
  desc.created_at = utc_now_iso();

  auto key_mu = cache.key_mutex(tmpl.template_id, desc.digest, vlm_config.backend_id);
  std::lock_guard key_lock(*key_mu);
  if (auto hit = cache.get(tmpl.template_id, desc.digest, vlm_config.backend_id)) {
    desc.text = *hit;
    desc.truncated = false;
    return desc;
  }

  std::string text;
  for (int attempt = 1; attempt <= std::max(1, max_attempts) && text.empty(); ++attempt) {
    ModelRequest req;
    req.text_prompt = std::string(kDescriptionPrompt);
    req.image = ImageAttachment{sniff_mime(bytes), bytes};
    req.request_id = "describe-" + tmpl.template_id + "-" + std::to_string(attempt);
    text = std::string(text::trim(gateway.complete(vlm_config, req).raw_text));
  }
  if (text.empty()) {
    throw Error(Errc::EmptyDescription, "blank description for template " + tmpl.template_id);
  }
  if (text::utf8_length(text) > kMaxDescriptionChars) {
    text = std::string(text::utf8_prefix(text, kMaxDescriptionChars));
    desc.truncated = true;
  }
  desc.text = text;
  cache.put(tmpl.template_id, desc.digest, vlm_config.backend_id, text);
  return desc;
}

json to_json(const GenerationRecord& r) {
  return {{"cell", cell_key(r.cell)},
          {"template_id", r.template_id},
          {"prompt_digest", r.prompt_digest},
          {"raw_text", r.raw_text},
          {"parse_outcome", to_string(r.parse_outcome)},
          {"captions", r.captions ? to_json(*r.captions) : json(nullptr)},
          {"attempt", r.attempt}};
}

GenerationRecord generate_meme_text(const PromptBundle& bundle, const CampaignCell& cell,
                                    const std::string& template_id, const BackendConfig& config,
                                    ModelGateway& gateway, int max_attempts,
                                    std::optional<ImageAttachment> image,
                                    const std::string& request_id_prefix) {
  GenerationRecord record;
  record.cell = cell;
  record.template_id = template_id;
  record.prompt_digest = bundle.prompt_digest;
  const int attempts = std::max(1, max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    ModelRequest req;
    req.text_prompt = bundle.rendered_text;
    req.image = image;
    req.request_id = request_id_prefix + "-a" + std::to_string(attempt);
    ModelResponse resp = gateway.complete(config, req);
    record.raw_text = std::move(resp.raw_text);
    record.attempt = attempt;
    ParseResult parsed = parse_captions(record.raw_text);
    record.parse_outcome = parsed.outcome;
    record.captions = std::move(parsed.captions);
    if (record.parse_outcome != ParseOutcome::Failed) break;
  }
  return record;
}

}  // namespace memeforge
