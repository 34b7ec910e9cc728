// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/prompts.hpp"

#include <regex>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/random.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

using json = nlohmann::json;

std::string_view to_string(Stance stance) {
  return stance == Stance::Support ? "Support" : "Deny";
}

Stance stance_from_string(std::string_view s) {
  const std::string lower = text::to_lower_ascii(text::trim(s));
  if (lower == "support") return Stance::Support;
  if (lower == "deny") return Stance::Deny;
  throw Error(Errc::SchemaError, "unknown stance '" + std::string(s) + "'");
}

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::Causes: return "Causes";
    case Technique::Consequences: return "Consequences";
    case Technique::Solutions: return "Solutions";
    case Technique::EvidenceOfAbsence: return "EvidenceOfAbsence";
    case Technique::Benefits: return "Benefits";
    case Technique::Rationale: return "Rationale";
  }
  return "Causes";
}

std::string_view technique_phrase(Technique t) {
  return t == Technique::EvidenceOfAbsence ? "Evidence of Absence" : to_string(t);
}

std::string_view technique_description(Technique t) {
  switch (t) {
    case Technique::Causes:
      return "Points at the factors that create or worsen the problem behind the cause.";
    case Technique::Consequences:
      return "Stresses the harmful outcomes the underlying problem can lead to.";
    case Technique::Solutions:
      return "Proposes remedies and urges the audience to act on the problem.";
    case Technique::EvidenceOfAbsence:
      return "Offers evidence that the problem does not exist or is not serious.";
    case Technique::Benefits:
      return "Argues that the problem may bring positive effects.";
    case Technique::Rationale:
      return "Claims that the state of affairs the cause opposes is justified by sound reasons.";
  }
  return "";
}

Technique technique_from_string(std::string_view s) {
  const std::string key = text::to_lower_ascii(text::trim(s));
  for (Technique t : kAllTechniques) {
    if (text::to_lower_ascii(to_string(t)) == key ||
        text::to_lower_ascii(technique_phrase(t)) == key) {
      return t;
    }
  }
  throw Error(Errc::SchemaError, "unknown technique '" + std::string(s) + "'");
}

std::string cell_key(const CampaignCell& cell) {
  return cell.cause_id + "/" + std::string(to_string(cell.stance)) + "/" +
         std::string(to_string(cell.technique));
}

// ---------------------------------------------------------------------------

Taxonomy::Taxonomy() = default;

const Taxonomy& Taxonomy::builtin() {
  static const Taxonomy kBuiltin = [] {
    Taxonomy t;
    t.register_cause({"climate_action", "Climate Action", "Climate Change"},
                     {{Stance::Support,
                       {Technique::Causes, Technique::Consequences, Technique::Solutions}},
                      {Stance::Deny, {Technique::EvidenceOfAbsence, Technique::Benefits}}});
    t.register_cause({"gender_equality", "Gender Equality", "Gender Inequality"},
                     {{Stance::Support,
                       {Technique::Causes, Technique::Consequences, Technique::Solutions}},
                      {Stance::Deny, {Technique::EvidenceOfAbsence, Technique::Rationale}}});
    return t;
  }();
  return kBuiltin;
}

void Taxonomy::register_cause(SocialCause cause,
                              std::map<Stance, std::set<Technique>> applicability) {
  static const std::regex kSnake("[a-z][a-z0-9]*(_[a-z0-9]+)*");
  if (!std::regex_match(cause.cause_id, kSnake)) {
    throw Error(Errc::ConfigError, "cause_id must be lowercase snake case: '" +
                                       cause.cause_id + "'");
  }
  if (cause.display_name.empty()) throw Error(Errc::ConfigError, "empty display_name");
  if (cause.topic_phrase.empty()) cause.topic_phrase = cause.display_name;
  if (entries_.contains(cause.cause_id)) {
    throw Error(Errc::ConfigError, "cause already registered: " + cause.cause_id);
  }
  for (Stance s : {Stance::Support, Stance::Deny}) {
    if (applicability[s].empty()) {
      throw Error(Errc::ConfigError, "cause " + cause.cause_id + " has no " +
                                         std::string(to_string(s)) + " techniques");
    }
  }
  std::string id = cause.cause_id;
  entries_.emplace(std::move(id), Entry{std::move(cause), std::move(applicability)});
}

const SocialCause& Taxonomy::cause(std::string_view cause_id) const {
  auto it = entries_.find(cause_id);
  if (it == entries_.end()) {
    throw Error(Errc::UnknownCause, "unknown cause '" + std::string(cause_id) + "'");
  }
  return it->second.cause;
}

bool Taxonomy::has_cause(std::string_view cause_id) const {
  return entries_.find(cause_id) != entries_.end();
}

std::vector<std::string> Taxonomy::cause_ids() const {
  std::vector<std::string> ids;
  for (const auto& [id, _] : entries_) ids.push_back(id);
  return ids;
}

std::set<Technique> Taxonomy::applicable_techniques(std::string_view cause_id,
                                                    Stance stance) const {
  auto it = entries_.find(cause_id);
  if (it == entries_.end()) {
    throw Error(Errc::UnknownCause, "unknown cause '" + std::string(cause_id) + "'");
  }
  auto s = it->second.applicability.find(stance);
  return s == it->second.applicability.end() ? std::set<Technique>{} : s->second;
}

bool Taxonomy::is_applicable(const CampaignCell& cell) const {
  if (!has_cause(cell.cause_id)) return false;
  return applicable_techniques(cell.cause_id, cell.stance).contains(cell.technique);
}

std::vector<CampaignCell> Taxonomy::all_cells() const {
  std::vector<CampaignCell> cells;
  for (const auto& [id, entry] : entries_) {
    for (Stance s : {Stance::Support, Stance::Deny}) {
      auto it = entry.applicability.find(s);
      if (it == entry.applicability.end()) continue;
      for (Technique t : it->second) cells.push_back({id, s, t});
    }
  }
  return cells;
}

std::string build_instruction(const Taxonomy& taxonomy, const CampaignCell& cell) {
  const SocialCause& cause = taxonomy.cause(cell.cause_id);
  if (!taxonomy.is_applicable(cell)) {
    throw Error(Errc::InapplicableTechnique,
                std::string(technique_phrase(cell.technique)) + " is not used to " +
                    std::string(to_string(cell.stance)) + " " + cell.cause_id);
  }
  return "Generate a caption to turn the image into a humorous meme that highlights the " +
         std::string(technique_phrase(cell.technique)) + " of " + cause.topic_phrase +
         " to " + std::string(to_string(cell.stance)) + " it.";
}

// ---------------------------------------------------------------------------

DemoPool DemoPool::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(Errc::FileMissing, "demo pool not found: " + path.string());
  }
  auto root = json::parse(read_file(path), nullptr, false);
  if (root.is_discarded() || !root.is_array()) {
    throw Error(Errc::SchemaError, "demo pool must be a JSON array: " + path.string());
  }
  DemoPool pool;
  try {
    for (const auto& cell : root) {
      const std::string cause_id = cell.at("cause_id").get<std::string>();
      const Stance stance = stance_from_string(cell.at("stance").get<std::string>());
      for (const auto& d : cell.at("demonstrations")) {
        Demonstration demo{d.at("template_name").get<std::string>(),
                           d.at("description_snippet").get<std::string>(),
                           d.at("instruction").get<std::string>(),
                           d.at("output_text").get<std::string>()};
        if (!demo.output_text.starts_with(kCotPrefix) ||
            demo.output_text.find("Caption at top:") == std::string::npos) {
          throw Error(Errc::SchemaError,
                      "demonstration for " + demo.template_name +
                          " must start with the step-by-step prefix and carry a top caption");
        }
        pool.add(cause_id, stance, std::move(demo));
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("demo pool: ") + e.what());
  }
  return pool;
}

void DemoPool::add(const std::string& cause_id, Stance stance, Demonstration demo) {
  pool_[{cause_id, stance}].push_back(std::move(demo));
}

const std::vector<Demonstration>& DemoPool::demos(const std::string& cause_id,
                                                  Stance stance) const {
  static const std::vector<Demonstration> kEmpty;
  auto it = pool_.find({cause_id, stance});
  return it == pool_.end() ? kEmpty : it->second;
}

// ---------------------------------------------------------------------------

std::string build_input_block(std::string_view template_name,
                              std::string_view description) {
  return "Image \"" + std::string(template_name) + "\" describing \"" +
         std::string(description) + "\"";
}

std::string render_prompt(const PromptBundle& bundle) {
  std::string out;
  for (const auto& demo : bundle.demonstrations) {
    out += "Instruction: " + demo.instruction + "\n";
    out += "Input: " + build_input_block(demo.template_name, demo.description_snippet) + "\n";
    out += "Output: " + demo.output_text + "\n\n";
  }
  if (!bundle.demonstrations.empty()) out += "###\n";
  out += "Instruction: " + bundle.instruction + "\n";
  out += "Input: " + bundle.input_block + "\n";
  out += "Output:";
  if (bundle.cot_prefix_enabled) {
    out += " ";
    out += kCotPrefix;
  }
  return out;
}

PromptBundle build_fewshot_prompt(const Taxonomy& taxonomy, const CampaignCell& cell,
                                  const MemeTemplate& tmpl, std::string_view description,
                                  const std::vector<Demonstration>& demo_pool,
                                  std::size_t n_demos, std::optional<std::uint64_t> seed) {
  PromptBundle bundle;
  bundle.instruction = build_instruction(taxonomy, cell);
  if (n_demos < 1) throw Error(Errc::InsufficientDemos, "n_demos must be >= 1");
  if (demo_pool.size() < n_demos) {
    throw Error(Errc::InsufficientDemos, "need " + std::to_string(n_demos) +
                                             " demonstrations, pool has " +
                                             std::to_string(demo_pool.size()));
  }
  if (seed) {
    std::vector<std::size_t> idx(demo_pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(*seed);
    for (std::size_t i = 0; i < n_demos; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
      std::swap(idx[i], idx[j]);
      bundle.demonstrations.push_back(demo_pool[idx[i]]);
    }
  } else {
    bundle.demonstrations.assign(demo_pool.begin(),
                                 demo_pool.begin() + static_cast<std::ptrdiff_t>(n_demos));
  }
  bundle.input_block = build_input_block(tmpl.name, description);
  bundle.cot_prefix_enabled = true;
  bundle.rendered_text = render_prompt(bundle);
  bundle.prompt_digest = sha256_hex(bundle.rendered_text);
  return bundle;
}

PromptBundle build_zeroshot_prompt(const Taxonomy& taxonomy, const CampaignCell& cell,
                                   const MemeTemplate& tmpl, std::string_view description) {
  PromptBundle bundle;
  bundle.instruction = build_instruction(taxonomy, cell);
  bundle.input_block = build_input_block(tmpl.name, description);
  bundle.cot_prefix_enabled = false;
  bundle.rendered_text = render_prompt(bundle);
  bundle.prompt_digest = sha256_hex(bundle.rendered_text);
  return bundle;
}

}  // namespace memeforge
