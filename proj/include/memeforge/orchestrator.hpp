// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/captions.hpp"
#include "memeforge/catalog.hpp"
#include "memeforge/compositor.hpp"
#include "memeforge/gateway.hpp"
#include "memeforge/prompts.hpp"
#include "memeforge/safety.hpp"

namespace memeforge {

struct CampaignSpec {
  std::string cause_id;
  Stance stance = Stance::Support;
  Technique technique_id = Technique::Causes;
  int count = 1;
  BackendKind backend_id = BackendKind::Stub;
  std::uint64_t seed = 0;

  CampaignCell cell() const { return {cause_id, stance, technique_id}; }
};

nlohmann::json to_json(const CampaignSpec& s);
CampaignSpec campaign_spec_from_json(const nlohmann::json& j);

struct CampaignPlan {
  std::vector<CampaignSpec> cells;
  int total = 0;
};

nlohmann::json to_json(const CampaignPlan& p);
/// Checks totals, duplicates and applicability. Throws Error{SchemaError,
/// InapplicableTechnique, UnknownCause}.
CampaignPlan campaign_plan_from_json(const nlohmann::json& j,
                                     const Taxonomy& taxonomy);

/// One cell per applicable (cause, stance, technique) of the built-in causes
/// for each model, each with `per_cell` memes. Throws Error{UnknownBackend,
/// ConfigError}.
CampaignPlan plan_full_campaign(const std::vector<std::string>& models,
                                int per_cell = 100,
                                const Taxonomy& taxonomy = Taxonomy::builtin());

enum class MemeStatus { Kept, RejectedHateful, FailedParse };
std::string_view to_string(MemeStatus s);
MemeStatus meme_status_from_string(std::string_view s);

struct Provenance {
  std::string prompt_digest;
  BackendKind backend_id = BackendKind::Stub;
  std::string raw_text_digest;
  std::string parse_outcome;
  int attempts = 0;
  std::string started_at;
  std::string finished_at;
  /// Set when the meme failed for a reason other than caption parsing
  /// (gateway error, unreadable template).
  std::optional<std::string> failure_reason;
};

struct MemeArtifact {
  std::string meme_id;
  CampaignSpec cell;
  std::string template_id;
  std::optional<CaptionPair> captions;
  std::optional<std::string> image_path;
  std::optional<SafetyVerdict> safety;
  MemeStatus status = MemeStatus::FailedParse;
  Provenance provenance;
};

nlohmann::json to_json(const MemeArtifact& a);
MemeArtifact meme_artifact_from_json(const nlohmann::json& j);

/// Same record with timestamps blanked, for reproducibility comparisons.
nlohmann::json without_timestamps(const nlohmann::json& artifact);

/// Opaque id "mf-<16 hex>" derived from (backend, cell, index). Ids carry
/// no readable cell information because evaluators see them.
std::string make_meme_id(const CampaignSpec& cell, int index);

struct RunConfig {
  std::map<BackendKind, BackendConfig> backends;
  BackendKind describer = BackendKind::LlavaLike;
  SafetyConfig safety;
  RenderStyle style;
  std::filesystem::path catalog_path;
  std::filesystem::path demo_pool_path;
  int parallelism = 4;
  int max_in_flight = 4;
  int max_attempts = 3;
  std::size_t n_demos = 4;
};

/// Built-in configuration rooted at the shipped data directory.
RunConfig default_run_config(const std::filesystem::path& data_dir);
/// Overlays a JSON config file on the defaults. Relative paths resolve
/// against the config file's directory. Throws Error{FileMissing,
/// ConfigError}.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::filesystem::path& data_dir);
nlohmann::json to_json(const RunConfig& config);

/// Immutable collaborators shared by all workers of a run.
struct RunContext {
  const Catalog* catalog = nullptr;
  const Taxonomy* taxonomy = nullptr;
  const DemoPool* demos = nullptr;
  std::shared_ptr<const Font> font;
  ModelGateway* gateway = nullptr;
  Classifier* classifier = nullptr;
  DescriptionCache* descriptions = nullptr;
};

struct RunOptions {
  std::string run_id;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  /// Stop (without compaction) after this many new terminal records; used
  /// to simulate an interrupted run.
  std::optional<int> stop_after;
};

struct RunResult {
  std::vector<MemeArtifact> records;  // compacted, sorted by meme_id
  int newly_processed = 0;
  int skipped_existing = 0;
  bool completed = false;
};

std::filesystem::path run_dir(const RunOptions& options);
std::filesystem::path manifest_path(const std::filesystem::path& run_dir);

/// Executes the plan: template sampling, description, prompt, generation,
/// rendering, safety scoring, status. Per-meme failures are recorded.
/// Rerunning with the same run_id skips meme_ids already in the manifest.
/// Throws Error{ConfigError, UnknownBackend} for configuration problems.
RunResult run_campaign(const CampaignPlan& plan, const RunConfig& config,
                       const RunContext& context, const RunOptions& options);

/// Reads a manifest; later lines for the same meme_id win. Torn lines are
/// skipped.
std::vector<MemeArtifact> read_manifest(const std::filesystem::path& path);

struct CellStats {
  int kept = 0;
  int rejected_hateful = 0;
  int failed_parse = 0;
  /// rejected / (kept + rejected); empty when that denominator is zero.
  std::optional<double> machine_hatefulness_rate;
};

struct RunStats {
  CellStats global;
  std::map<std::string, CellStats> per_cell;  // "<backend>|<cell_key>"
};

/// Throws Error{EmptyManifest}.
RunStats run_stats(const std::vector<MemeArtifact>& manifest);
nlohmann::json to_json(const RunStats& stats);

}  // namespace memeforge
