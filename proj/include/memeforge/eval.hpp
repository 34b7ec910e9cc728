// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memeforge/jsonl.hpp"
#include "memeforge/orchestrator.hpp"
#include "memeforge/prompts.hpp"

namespace memeforge {

struct Evaluator {
  std::string evaluator_id;
  std::string display_name;
  std::string token_ref;
};

enum class TaskStatus { Pending, Done };

struct Assignment {
  std::string meme_id;
  std::vector<std::string> evaluator_ids;
  std::map<std::string, TaskStatus> status;
};

nlohmann::json to_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j);

/// Gives every meme `k` distinct evaluators, least-loaded first with seeded
/// tie-breaking, so per-evaluator loads differ by at most one.
/// Throws Error{TooFewEvaluators} unless evaluators.size() >= k >= 2.
std::vector<Assignment> make_assignments(
    const std::vector<std::string>& meme_ids,
    const std::vector<Evaluator>& evaluators, int k = 2,
    std::uint64_t seed = 0);

enum class Conveyance { Support, Deny, NA };
std::string_view to_string(Conveyance c);
/// Throws Error{RangeError}.
Conveyance conveyance_from_string(std::string_view s);

struct Rating {
  std::string meme_id;
  std::string evaluator_id;
  bool authenticity = false;
  int hilarity = 1;        // 1..5
  Conveyance conveyance = Conveyance::NA;
  int persuasiveness = 1;  // 1..5
  bool hateful = false;
  std::string submitted_at;

  /// Equality of the judgments, ignoring submitted_at.
  bool same_judgment(const Rating& other) const;
};

nlohmann::json to_json(const Rating& r);
/// Throws Error{RangeError} for out-of-range or mistyped fields.
Rating rating_from_json(const nlohmann::json& j);
/// Throws Error{RangeError}.
void validate(const Rating& r);

/// Append-only rating log. Only the latest record per (meme, evaluator)
/// counts. All writes are serialized; reads return snapshots.
class RatingsStore {
 public:
  RatingsStore() = default;
  /// Replays `path` and appends new records to it.
  explicit RatingsStore(const std::filesystem::path& path);

  /// Returns false (and writes nothing) when the judgment equals the current
  /// latest one for the pair. Throws Error{RangeError}.
  bool submit(const Rating& rating);

  std::vector<Rating> latest() const;
  std::size_t record_count() const;

 private:
  mutable std::mutex mu_;
  std::vector<Rating> records_;
  std::map<std::pair<std::string, std::string>, std::size_t> latest_;
  std::unique_ptr<JsonlAppender> sink_;
};

/// Mean over memes of the per-meme fraction of "yes". Throws
/// Error{NoRatings}.
double authenticity_score(const std::vector<Rating>& ratings);
/// Mean over memes of the per-meme fraction of raters whose label equals
/// `stance`; NA never matches. Throws Error{NoRatings}.
double conveyance_score(const std::vector<Rating>& ratings, Stance stance);
/// Same averaging over the hateful flag. Throws Error{NoRatings}.
double human_hatefulness(const std::vector<Rating>& ratings);

struct ScoreDistribution {
  std::array<int, 5> histogram{};  // index 0 = score 1
  int median = 0;                  // lower median
  int total = 0;
};

/// Rater-level histograms of raw 1..5 scores. Throws Error{NoRatings}.
ScoreDistribution distribution_of(const std::vector<int>& scores);
struct ScoreDistributions {
  ScoreDistribution hilarity;
  ScoreDistribution persuasiveness;
};
ScoreDistributions score_distributions(const std::vector<Rating>& ratings);

/// What the report needs to know about a rated meme.
struct MemeInfo {
  std::string meme_id;
  /// Generator label: a backend display name or a baseline source.
  std::string source;
  std::optional<std::string> cause_id;
  std::optional<Stance> stance;
  std::optional<Technique> technique;
  std::optional<BackendKind> backend;
  std::optional<MemeStatus> status;
};

/// Manifest records become MemeInfo using `display_names` for backends.
std::vector<MemeInfo> meme_info_from_manifest(
    const std::vector<MemeArtifact>& manifest,
    const std::map<BackendKind, std::string>& display_names);

/// Baseline memes file: JSON array of {meme_id, source[, cause_id]}.
std::vector<MemeInfo> load_baselines(const std::filesystem::path& path);

struct CellMetrics {
  std::string source;
  std::optional<std::string> cause_id;
  std::optional<Stance> stance;
  std::optional<Technique> technique;
  int rated_memes = 0;
  int ratings = 0;
  int generated = 0;
  int machine_flagged = 0;
  std::optional<double> authenticity;
  std::optional<double> conveyance_support;
  std::optional<double> conveyance_deny;
  std::optional<double> human_hatefulness;
  std::optional<double> machine_hatefulness;
  ScoreDistribution hilarity;
  ScoreDistribution persuasiveness;
};

struct MetricsReport {
  /// Per (source, cause, technique, stance), including planned-but-unrated
  /// cells (count 0, empty scores).
  std::vector<CellMetrics> cells;
  /// Per (source, cause): authenticity, hatefulness, distributions.
  std::vector<CellMetrics> groups;
};

/// Joins ratings to memes and computes every table. Throws
/// Error{JoinError} when a rating names an unknown meme.
MetricsReport build_report(const std::vector<Rating>& ratings,
                           const std::vector<MemeInfo>& memes,
                           const Taxonomy& taxonomy = Taxonomy::builtin());

/// Human-readable summary. Authenticity rows read
/// "<source>, <cause display>, <score>".
std::string render_report_text(const MetricsReport& report,
                               const Taxonomy& taxonomy = Taxonomy::builtin());

/// Writes authenticity.csv, conveyance.csv, hatefulness.csv,
/// distributions.csv, cells.csv and summary.txt into `dir`.
void write_report(const MetricsReport& report, const std::filesystem::path& dir,
                  const Taxonomy& taxonomy = Taxonomy::builtin());

nlohmann::json to_json(const CellMetrics& m);

}  // namespace memeforge
