// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/catalog.hpp"

namespace memeforge {

enum class Stance { Support, Deny };

std::string_view to_string(Stance stance);
/// Accepts "Support"/"Deny" in any case. Throws Error{SchemaError}.
Stance stance_from_string(std::string_view s);

enum class Technique {
  Causes,
  Consequences,
  Solutions,
  EvidenceOfAbsence,
  Benefits,
  Rationale,
};

inline constexpr Technique kAllTechniques[] = {
    Technique::Causes,   Technique::Consequences, Technique::Solutions,
    Technique::EvidenceOfAbsence, Technique::Benefits, Technique::Rationale};

/// Identifier form, e.g. "EvidenceOfAbsence".
std::string_view to_string(Technique technique);
/// Display form used in instructions, e.g. "Evidence of Absence".
std::string_view technique_phrase(Technique technique);
std::string_view technique_description(Technique technique);
/// Throws Error{SchemaError}.
Technique technique_from_string(std::string_view s);

struct SocialCause {
  std::string cause_id;      // lowercase snake, e.g. "climate_action"
  std::string display_name;  // "Climate Action"
  /// Subject named in generation instructions ("Climate Change").
  std::string topic_phrase;
};

struct CampaignCell {
  std::string cause_id;
  Stance stance = Stance::Support;
  Technique technique = Technique::Causes;

  auto operator<=>(const CampaignCell&) const = default;
};

/// "climate_action/Support/Causes"
std::string cell_key(const CampaignCell& cell);

/// Causes with their stance-specific persuasion technique sets. Built-ins
/// (climate_action, gender_equality) are frozen; extra causes can be added.
class Taxonomy {
 public:
  static const Taxonomy& builtin();

  Taxonomy();

  /// Throws Error{ConfigError} for malformed ids, empty sets, or attempts to
  /// replace an existing cause.
  void register_cause(SocialCause cause,
                      std::map<Stance, std::set<Technique>> applicability);

  /// Throws Error{UnknownCause}.
  const SocialCause& cause(std::string_view cause_id) const;
  bool has_cause(std::string_view cause_id) const;
  std::vector<std::string> cause_ids() const;

  /// Throws Error{UnknownCause}.
  std::set<Technique> applicable_techniques(std::string_view cause_id,
                                            Stance stance) const;
  bool is_applicable(const CampaignCell& cell) const;

  /// Every applicable (cause, stance, technique) in a fixed order.
  std::vector<CampaignCell> all_cells() const;

 private:
  struct Entry {
    SocialCause cause;
    std::map<Stance, std::set<Technique>> applicability;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

/// "Generate a caption to turn the image into a humorous meme that
/// highlights the <technique> of <topic> to <Support|Deny> it."
/// Throws Error{UnknownCause, InapplicableTechnique}.
std::string build_instruction(const Taxonomy& taxonomy,
                              const CampaignCell& cell);

inline constexpr std::string_view kCotPrefix = "Let's think step by step.";

struct Demonstration {
  std::string template_name;
  std::string description_snippet;
  std::string instruction;
  std::string output_text;  // begins with kCotPrefix, holds caption markers
};

/// Demonstrations keyed by (cause_id, stance).
class DemoPool {
 public:
  /// Reads the JSON demo pool file. Throws Error{FileMissing, SchemaError}.
  static DemoPool load(const std::filesystem::path& path);

  void add(const std::string& cause_id, Stance stance, Demonstration demo);
  const std::vector<Demonstration>& demos(const std::string& cause_id,
                                          Stance stance) const;

 private:
  std::map<std::pair<std::string, Stance>, std::vector<Demonstration>> pool_;
};

struct PromptBundle {
  std::string instruction;
  std::string input_block;
  std::vector<Demonstration> demonstrations;
  bool cot_prefix_enabled = false;
  std::string rendered_text;
  std::string prompt_digest;  // SHA-256 of rendered_text
};

/// `Image "<name>" describing "<description>"`
std::string build_input_block(std::string_view template_name,
                              std::string_view description);

/// Few-shot prompt: `n_demos` demonstrations (the first of the pool, or a
/// seeded selection), a `###` separator, then the live instruction and input
/// with the output opened by the chain-of-thought prefix.
/// Throws Error{InapplicableTechnique, InsufficientDemos, UnknownCause}.
PromptBundle build_fewshot_prompt(const Taxonomy& taxonomy,
                                  const CampaignCell& cell,
                                  const MemeTemplate& tmpl,
                                  std::string_view description,
                                  const std::vector<Demonstration>& demo_pool,
                                  std::size_t n_demos = 4,
                                  std::optional<std::uint64_t> seed = {});

/// Zero-shot prompt: same skeleton, no demonstrations, no prefix.
PromptBundle build_zeroshot_prompt(const Taxonomy& taxonomy,
                                   const CampaignCell& cell,
                                   const MemeTemplate& tmpl,
                                   std::string_view description);

/// Renders the text of a bundle from its parts.
std::string render_prompt(const PromptBundle& bundle);

}  // namespace memeforge
