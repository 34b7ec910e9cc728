// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "memeforge/error.hpp"
#include "memeforge/random.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

using json = nlohmann::json;

json to_json(const Assignment& a) {
  json status = json::object();
  for (const auto& [id, s] : a.status) status[id] = s == TaskStatus::Done ? "Done" : "Pending";
  return {{"meme_id", a.meme_id}, {"evaluator_ids", a.evaluator_ids}, {"status", status}};
}

Assignment assignment_from_json(const json& j) {
  Assignment a;
  try {
    a.meme_id = j.at("meme_id").get<std::string>();
    a.evaluator_ids = j.at("evaluator_ids").get<std::vector<std::string>>();
    for (const auto& id : a.evaluator_ids) a.status[id] = TaskStatus::Pending;
    if (j.contains("status")) {
      for (const auto& [id, s] : j["status"].items()) {
        a.status[id] = s.get<std::string>() == "Done" ? TaskStatus::Done : TaskStatus::Pending;
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("assignment: ") + e.what());
  }
  std::set<std::string> distinct(a.evaluator_ids.begin(), a.evaluator_ids.end());
  if (a.evaluator_ids.size() < 2 || distinct.size() != a.evaluator_ids.size()) {
    throw Error(Errc::SchemaError, "assignment " + a.meme_id + " needs >= 2 distinct evaluators");
  }
  return a;
}

std::vector<Assignment> make_assignments(const std::vector<std::string>& meme_ids,
                                         const std::vector<Evaluator>& evaluators, int k,
                                         std::uint64_t seed) {
  if (k < 2 || evaluators.size() < static_cast<std::size_t>(k)) {
    throw Error(Errc::TooFewEvaluators, "need at least k >= 2 evaluators, have " +
                                            std::to_string(evaluators.size()) +
                                            " for k=" + std::to_string(k));
  }
  std::set<std::string> ids;
  for (const auto& e : evaluators) {
    if (!ids.insert(e.evaluator_id).second) {
      throw Error(Errc::SchemaError, "duplicate evaluator " + e.evaluator_id);
    }
  }
  Rng rng(seed);
  std::vector<int> load(evaluators.size(), 0);
  std::vector<std::size_t> order(evaluators.size());
  std::vector<Assignment> out;
  out.reserve(meme_ids.size());
  for (const auto& meme : meme_ids) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return load[a] < load[b]; });
    Assignment a;
    a.meme_id = meme;
    for (int j = 0; j < k; ++j) {
      const std::size_t e = order[static_cast<std::size_t>(j)];
      ++load[e];
      a.evaluator_ids.push_back(evaluators[e].evaluator_id);
      a.status[evaluators[e].evaluator_id] = TaskStatus::Pending;
    }
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ratings

std::string_view to_string(Conveyance c) {
  switch (c) {
    case Conveyance::Support: return "Support";
    case Conveyance::Deny: return "Deny";
    case Conveyance::NA: return "NA";
  }
  return "NA";
}

Conveyance conveyance_from_string(std::string_view s) {
  const std::string lower = text::to_lower_ascii(text::trim(s));
  if (lower == "support") return Conveyance::Support;
  if (lower == "deny") return Conveyance::Deny;
  if (lower == "na" || lower == "n/a") return Conveyance::NA;
  throw Error(Errc::RangeError, "conveyance must be Support, Deny or NA");
}

bool Rating::same_judgment(const Rating& o) const {
  return meme_id == o.meme_id && evaluator_id == o.evaluator_id &&
         authenticity == o.authenticity && hilarity == o.hilarity &&
         conveyance == o.conveyance && persuasiveness == o.persuasiveness &&
         hateful == o.hateful;
}

json to_json(const Rating& r) {
  return {{"meme_id", r.meme_id},
          {"evaluator_id", r.evaluator_id},
          {"authenticity", r.authenticity},
          {"hilarity", r.hilarity},
          {"conveyance", to_string(r.conveyance)},
          {"persuasiveness", r.persuasiveness},
          {"hateful", r.hateful},
          {"submitted_at", r.submitted_at}};
}

void validate(const Rating& r) {
  if (r.meme_id.empty()) throw Error(Errc::RangeError, "meme_id is empty");
  if (r.evaluator_id.empty()) throw Error(Errc::RangeError, "evaluator_id is empty");
  if (r.hilarity < 1 || r.hilarity > 5) {
    throw Error(Errc::RangeError, "hilarity must be 1..5, got " + std::to_string(r.hilarity));
  }
  if (r.persuasiveness < 1 || r.persuasiveness > 5) {
    throw Error(Errc::RangeError,
                "persuasiveness must be 1..5, got " + std::to_string(r.persuasiveness));
  }
}

Rating rating_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::RangeError, "rating must be a JSON object");
  auto field = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end()) throw Error(Errc::RangeError, std::string("missing field ") + name);
    return *it;
  };
  auto boolean = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_boolean()) throw Error(Errc::RangeError, std::string(name) + " must be a boolean");
    return v.get<bool>();
  };
  auto integer = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_number_integer()) {
      throw Error(Errc::RangeError, std::string(name) + " must be an integer");
    }
    return v.get<int>();
  };
  auto string = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_string()) throw Error(Errc::RangeError, std::string(name) + " must be a string");
    return v.get<std::string>();
  };
  Rating r;
  r.meme_id = string("meme_id");
  r.evaluator_id = j.contains("evaluator_id") ? string("evaluator_id") : std::string{};
  r.authenticity = boolean("authenticity");
  r.hilarity = integer("hilarity");
  r.conveyance = conveyance_from_string(string("conveyance"));
  r.persuasiveness = integer("persuasiveness");
  r.hateful = boolean("hateful");
  if (j.contains("submitted_at") && j["submitted_at"].is_string()) {
    r.submitted_at = j["submitted_at"].get<std::string>();
  }
  return r;
}

RatingsStore::RatingsStore(const std::filesystem::path& path) {
  for (const auto& j : read_jsonl(path)) {
    try {
      Rating r = rating_from_json(j);
      validate(r);
      latest_[{r.meme_id, r.evaluator_id}] = records_.size();
      records_.push_back(std::move(r));
    } catch (const Error&) {
      // Records that fail validation were never acknowledged; skip them.
    }
  }
  sink_ = std::make_unique<JsonlAppender>(path);
}

bool RatingsStore::submit(const Rating& rating) {
  validate(rating);
  std::lock_guard lock(mu_);
  const auto key = std::make_pair(rating.meme_id, rating.evaluator_id);
  if (auto it = latest_.find(key); it != latest_.end() && records_[it->second].same_judgment(rating)) {
    return false;
  }
  Rating r = rating;
  if (r.submitted_at.empty()) r.submitted_at = utc_now_iso();
  if (sink_) sink_->append(to_json(r));
  latest_[key] = records_.size();
  records_.push_back(std::move(r));
  return true;
}

std::vector<Rating> RatingsStore::latest() const {
  std::lock_guard lock(mu_);
  std::vector<Rating> out;
  out.reserve(latest_.size());
  for (const auto& [_, idx] : latest_) out.push_back(records_[idx]);
  return out;
}

std::size_t RatingsStore::record_count() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

template <typename Fn>
double mean_of_meme_means(const std::vector<Rating>& ratings, Fn value) {
  if (ratings.empty()) throw Error(Errc::NoRatings, "no ratings");
  std::map<std::string, std::pair<double, int>> per_meme;
  for (const auto& r : ratings) {
    auto& [sum, n] = per_meme[r.meme_id];
    sum += value(r);
    ++n;
  }
  double total = 0.0;
  for (const auto& [_, p] : per_meme) total += p.first / p.second;
  return total / static_cast<double>(per_meme.size());
}

}  // namespace

double authenticity_score(const std::vector<Rating>& ratings) {
  return mean_of_meme_means(ratings, [](const Rating& r) { return r.authenticity ? 1.0 : 0.0; });
}

double conveyance_score(const std::vector<Rating>& ratings, Stance stance) {
  const Conveyance want = stance == Stance::Support ? Conveyance::Support : Conveyance::Deny;
  return mean_of_meme_means(ratings,
                            [want](const Rating& r) { return r.conveyance == want ? 1.0 : 0.0; });
}

double human_hatefulness(const std::vector<Rating>& ratings) {
  return mean_of_meme_means(ratings, [](const Rating& r) { return r.hateful ? 1.0 : 0.0; });
}

ScoreDistribution distribution_of(const std::vector<int>& scores) {
  if (scores.empty()) throw Error(Errc::NoRatings, "no scores");
  ScoreDistribution d;
  std::vector<int> sorted = scores;
  for (int s : sorted) {
    if (s < 1 || s > 5) throw Error(Errc::RangeError, "score outside 1..5");
    ++d.histogram[static_cast<std::size_t>(s - 1)];
  }
  std::sort(sorted.begin(), sorted.end());
  d.median = sorted[(sorted.size() - 1) / 2];
  d.total = static_cast<int>(sorted.size());
  return d;
}

ScoreDistributions score_distributions(const std::vector<Rating>& ratings) {
  if (ratings.empty()) throw Error(Errc::NoRatings, "no ratings");
  std::vector<int> hil, per;
  for (const auto& r : ratings) {
    hil.push_back(r.hilarity);
    per.push_back(r.persuasiveness);
  }
  return {distribution_of(hil), distribution_of(per)};
}

// ---------------------------------------------------------------------------
// Report

std::vector<MemeInfo> meme_info_from_manifest(const std::vector<MemeArtifact>& manifest,
                                              const std::map<BackendKind, std::string>& names) {
  std::vector<MemeInfo> out;
  out.reserve(manifest.size());
  for (const auto& a : manifest) {
    MemeInfo m;
    m.meme_id = a.meme_id;
    auto it = names.find(a.cell.backend_id);
    m.source = it != names.end() ? it->second : std::string(to_string(a.cell.backend_id));
    m.cause_id = a.cell.cause_id;
    m.stance = a.cell.stance;
    m.technique = a.cell.technique_id;
    m.backend = a.cell.backend_id;
    m.status = a.status;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<MemeInfo> load_baselines(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(Errc::FileMissing, "baselines not found: " + path.string());
  }
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    throw Error(Errc::SchemaError, "baselines must be a JSON array");
  }
  std::vector<MemeInfo> out;
  try {
    for (const auto& b : j) {
      MemeInfo m;
      m.meme_id = b.at("meme_id").get<std::string>();
      m.source = b.at("source").get<std::string>();
      if (b.contains("cause_id") && b["cause_id"].is_string()) {
        m.cause_id = b["cause_id"].get<std::string>();
      }
      out.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("baselines: ") + e.what());
  }
  return out;
}

namespace {

// Sort key; absent fields sort first.
using CellKey = std::tuple<std::string, std::string, std::string, std::string>;

std::string opt_str(const std::optional<std::string>& s) { return s.value_or(""); }

struct Bucket {
  CellMetrics metrics;
  std::vector<Rating> ratings;
  int kept = 0;
  int rejected = 0;
};

void finish(Bucket& b) {
  CellMetrics& m = b.metrics;
  std::set<std::string> rated;
  for (const auto& r : b.ratings) rated.insert(r.meme_id);
  m.rated_memes = static_cast<int>(rated.size());
  m.ratings = static_cast<int>(b.ratings.size());
  if (b.kept + b.rejected > 0) {
    m.machine_hatefulness = static_cast<double>(b.rejected) / (b.kept + b.rejected);
  }
  if (b.ratings.empty()) return;
  m.authenticity = authenticity_score(b.ratings);
  m.conveyance_support = conveyance_score(b.ratings, Stance::Support);
  m.conveyance_deny = conveyance_score(b.ratings, Stance::Deny);
  m.human_hatefulness = human_hatefulness(b.ratings);
  const auto dist = score_distributions(b.ratings);
  m.hilarity = dist.hilarity;
  m.persuasiveness = dist.persuasiveness;
}

void add_meme(Bucket& b, const MemeInfo& info) {
  ++b.metrics.generated;
  if (info.status == MemeStatus::Kept) ++b.kept;
  if (info.status == MemeStatus::RejectedHateful) {
    ++b.rejected;
    ++b.metrics.machine_flagged;
  }
}

}  // namespace

MetricsReport build_report(const std::vector<Rating>& ratings, const std::vector<MemeInfo>& memes,
                           const Taxonomy&) {
  std::map<std::string, const MemeInfo*> by_id;
  for (const auto& m : memes) by_id[m.meme_id] = &m;

  std::map<CellKey, Bucket> cells;
  std::map<CellKey, Bucket> groups;
  auto cell_of = [&](const MemeInfo& m) -> Bucket& {
    CellKey key{m.source, opt_str(m.cause_id),
                m.technique ? std::string(to_string(*m.technique)) : "",
                m.stance ? std::string(to_string(*m.stance)) : ""};
    auto [it, fresh] = cells.try_emplace(key);
    if (fresh) {
      it->second.metrics.source = m.source;
      it->second.metrics.cause_id = m.cause_id;
      it->second.metrics.technique = m.technique;
      it->second.metrics.stance = m.stance;
    }
    return it->second;
  };
  auto group_of = [&](const MemeInfo& m) -> Bucket& {
    CellKey key{m.source, opt_str(m.cause_id), "", ""};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) {
      it->second.metrics.source = m.source;
      it->second.metrics.cause_id = m.cause_id;
    }
    return it->second;
  };

  for (const auto& [_, m] : by_id) {
    add_meme(cell_of(*m), *m);
    add_meme(group_of(*m), *m);
  }
  for (const auto& r : ratings) {
    auto it = by_id.find(r.meme_id);
    if (it == by_id.end()) {
      throw Error(Errc::JoinError, "rating references unknown meme " + r.meme_id);
    }
    cell_of(*it->second).ratings.push_back(r);
    group_of(*it->second).ratings.push_back(r);
  }

  MetricsReport report;
  for (auto& [_, b] : cells) {
    finish(b);
    report.cells.push_back(std::move(b.metrics));
  }
  for (auto& [_, b] : groups) {
    finish(b);
    report.groups.push_back(std::move(b.metrics));
  }
  return report;
}

json to_json(const CellMetrics& m) {
  auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  auto dist = [](const ScoreDistribution& d) {
    return json{{"histogram", d.histogram}, {"median", d.total ? json(d.median) : json(nullptr)},
                {"total", d.total}};
  };
  return {{"source", m.source},
          {"cause_id", opt(m.cause_id)},
          {"stance", m.stance ? json(to_string(*m.stance)) : json(nullptr)},
          {"technique", m.technique ? json(to_string(*m.technique)) : json(nullptr)},
          {"rated_memes", m.rated_memes},
          {"ratings", m.ratings},
          {"generated", m.generated},
          {"machine_flagged", m.machine_flagged},
          {"authenticity", opt(m.authenticity)},
          {"conveyance_support", opt(m.conveyance_support)},
          {"conveyance_deny", opt(m.conveyance_deny)},
          {"human_hatefulness", opt(m.human_hatefulness)},
          {"machine_hatefulness", opt(m.machine_hatefulness)},
          {"hilarity", dist(m.hilarity)},
          {"persuasiveness", dist(m.persuasiveness)}};
}

}  // namespace memeforge
