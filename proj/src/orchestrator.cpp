// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/random.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

json to_json(const CampaignSpec& s) {
  return {{"cause_id", s.cause_id},
          {"stance", to_string(s.stance)},
          {"technique_id", to_string(s.technique_id)},
          {"count", s.count},
          {"backend_id", to_string(s.backend_id)},
          {"seed", s.seed}};
}

CampaignSpec campaign_spec_from_json(const json& j) {
  CampaignSpec s;
  try {
    s.cause_id = j.at("cause_id").get<std::string>();
    s.stance = stance_from_string(j.at("stance").get<std::string>());
    s.technique_id = technique_from_string(j.at("technique_id").get<std::string>());
    s.count = j.at("count").get<int>();
    s.backend_id = backend_kind_from_string(j.at("backend_id").get<std::string>());
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("campaign cell: ") + e.what());
  }
  return s;
}

json to_json(const CampaignPlan& p) {
  json cells = json::array();
  for (const auto& c : p.cells) cells.push_back(to_json(c));
  return {{"cells", std::move(cells)}, {"total", p.total}};
}

namespace {

void check_plan(const CampaignPlan& plan, const Taxonomy& taxonomy) {
  std::set<std::string> seen;
  int sum = 0;
  for (const auto& c : plan.cells) {
    if (c.count < 1) throw Error(Errc::SchemaError, "cell count must be >= 1");
    build_instruction(taxonomy, c.cell());  // throws for unknown or inapplicable cells
    const std::string key = std::string(to_string(c.backend_id)) + "|" + cell_key(c.cell());
    if (!seen.insert(key).second) throw Error(Errc::SchemaError, "duplicate cell " + key);
    sum += c.count;
  }
  if (sum != plan.total) {
    throw Error(Errc::SchemaError, fmt::format("plan total {} != sum of counts {}", plan.total, sum));
  }
}

}  // namespace

CampaignPlan campaign_plan_from_json(const json& j, const Taxonomy& taxonomy) {
  CampaignPlan plan;
  if (!j.is_object() || !j.contains("cells") || !j["cells"].is_array()) {
    throw Error(Errc::SchemaError, "plan must be an object with a cells array");
  }
  for (const auto& c : j["cells"]) plan.cells.push_back(campaign_spec_from_json(c));
  int sum = 0;
  for (const auto& c : plan.cells) sum += c.count;
  plan.total = j.value("total", sum);
  check_plan(plan, taxonomy);
  return plan;
}

CampaignPlan plan_full_campaign(const std::vector<std::string>& models, int per_cell,
                                 const Taxonomy& taxonomy) {
  if (models.empty()) throw Error(Errc::ConfigError, "no models given");
  if (per_cell < 1) throw Error(Errc::ConfigError, "per_cell must be >= 1");
  CampaignPlan plan;
  std::set<BackendKind> used;
  for (const auto& m : models) {
    const BackendKind kind = backend_kind_from_string(text::trim(m));
    if (!used.insert(kind).second) {
      throw Error(Errc::ConfigError, "model listed twice: " + std::string(to_string(kind)));
    }
    for (const auto& cell : taxonomy.all_cells()) {
      CampaignSpec s;
      s.cause_id = cell.cause_id;
      s.stance = cell.stance;
      s.technique_id = cell.technique;
      s.count = per_cell;
      s.backend_id = kind;
      s.seed = fnv1a64(std::string(to_string(kind)) + "|" + cell_key(cell));
      plan.cells.push_back(std::move(s));
      plan.total += per_cell;
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------

std::string_view to_string(MemeStatus s) {
  switch (s) {
    case MemeStatus::Kept: return "Kept";
    case MemeStatus::RejectedHateful: return "RejectedHateful";
    case MemeStatus::FailedParse: return "FailedParse";
  }
  return "FailedParse";
}

MemeStatus meme_status_from_string(std::string_view s) {
  if (s == "Kept") return MemeStatus::Kept;
  if (s == "RejectedHateful") return MemeStatus::RejectedHateful;
  if (s == "FailedParse") return MemeStatus::FailedParse;
  throw Error(Errc::SchemaError, "unknown status '" + std::string(s) + "'");
}

json to_json(const MemeArtifact& a) {
  json prov = {{"prompt_digest", a.provenance.prompt_digest},
               {"backend_id", to_string(a.provenance.backend_id)},
               {"raw_text_digest", a.provenance.raw_text_digest},
               {"parse_outcome", a.provenance.parse_outcome},
               {"attempts", a.provenance.attempts},
               {"timestamps",
                {{"started_at", a.provenance.started_at},
                 {"finished_at", a.provenance.finished_at}}}};
  prov["failure_reason"] =
      a.provenance.failure_reason ? json(*a.provenance.failure_reason) : json(nullptr);
  return {{"meme_id", a.meme_id},
          {"cell", to_json(a.cell)},
          {"template_id", a.template_id},
          {"captions", a.captions ? to_json(*a.captions) : json(nullptr)},
          {"image_path", a.image_path ? json(*a.image_path) : json(nullptr)},
          {"safety", a.safety ? to_json(*a.safety) : json(nullptr)},
          {"status", to_string(a.status)},
          {"provenance", std::move(prov)}};
}

MemeArtifact meme_artifact_from_json(const json& j) {
  MemeArtifact a;
  a.meme_id = j.at("meme_id").get<std::string>();
  a.cell = campaign_spec_from_json(j.at("cell"));
  a.template_id = j.value("template_id", std::string{});
  if (j.contains("captions") && j["captions"].is_object()) {
    a.captions = caption_pair_from_json(j["captions"]);
  }
  if (j.contains("image_path") && j["image_path"].is_string()) {
    a.image_path = j["image_path"].get<std::string>();
  }
  if (j.contains("safety") && j["safety"].is_object()) {
    a.safety = safety_verdict_from_json(j["safety"]);
  }
  a.status = meme_status_from_string(j.at("status").get<std::string>());
  const json& p = j.at("provenance");
  a.provenance.prompt_digest = p.value("prompt_digest", std::string{});
  a.provenance.backend_id = backend_kind_from_string(p.at("backend_id").get<std::string>());
  a.provenance.raw_text_digest = p.value("raw_text_digest", std::string{});
  a.provenance.parse_outcome = p.value("parse_outcome", std::string{});
  a.provenance.attempts = p.value("attempts", 0);
  if (p.contains("timestamps") && p["timestamps"].is_object()) {
    a.provenance.started_at = p["timestamps"].value("started_at", std::string{});
    a.provenance.finished_at = p["timestamps"].value("finished_at", std::string{});
  }
  if (p.contains("failure_reason") && p["failure_reason"].is_string()) {
    a.provenance.failure_reason = p["failure_reason"].get<std::string>();
  }
  return a;
}

json without_timestamps(const json& artifact) {
  json out = artifact;
  if (out.contains("provenance") && out["provenance"].is_object()) {
    out["provenance"].erase("timestamps");
  }
  return out;
}

std::string make_meme_id(const CampaignSpec& cell, int index) {
  const std::string key = fmt::format("{}|{}|{}", to_string(cell.backend_id),
                                      cell_key(cell.cell()), index);
  return "mf-" + sha256_hex(key).substr(0, 16);
}

// ---------------------------------------------------------------------------
// Configuration

RunConfig default_run_config(const fs::path& data_dir) {
  RunConfig c;
  for (BackendKind k : {BackendKind::ChatGptLike, BackendKind::LlamaLike, BackendKind::LlavaLike,
                        BackendKind::Stub}) {
    c.backends[k] = default_backend_config(k);
  }
  c.safety.classifier_url = "http://127.0.0.1:8090/classify";
  c.style.font_ref = (data_dir / "fonts" / "DejaVuSans-Bold.ttf").string();
  c.catalog_path = data_dir / "templates" / "catalog.csv";
  c.demo_pool_path = data_dir / "demos" / "demo_pool.json";
  return c;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? (base / path).lexically_normal() : path;
}

FailMode fail_mode_from_string(std::string_view s) {
  const std::string lower = text::to_lower_ascii(s);
  if (lower == "closed") return FailMode::Closed;
  if (lower == "open") return FailMode::Open;
  throw Error(Errc::ConfigError, "fail_mode must be Closed or Open");
}

}  // namespace

RunConfig load_run_config(const fs::path& path, const fs::path& data_dir) {
  if (!fs::is_regular_file(path)) throw Error(Errc::FileMissing, "config not found: " + path.string());
  auto j = json::parse(read_file(path), nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::ConfigError, "config is not a JSON object: " + path.string());
  }
  const fs::path base = fs::absolute(path).parent_path();
  RunConfig c = default_run_config(data_dir);
  try {
    if (j.contains("backends")) {
      for (const auto& b : j["backends"]) {
        BackendConfig bc = backend_config_from_json(b);
        c.backends[bc.backend_id] = bc;
      }
    }
    if (j.contains("describer")) {
      c.describer = backend_kind_from_string(j["describer"].get<std::string>());
    }
    if (j.contains("safety")) {
      const json& s = j["safety"];
      c.safety.classifier_url = s.value("classifier_url", c.safety.classifier_url);
      c.safety.threshold = s.value("threshold", c.safety.threshold);
      c.safety.timeout_ms = s.value("timeout_ms", c.safety.timeout_ms);
      if (s.contains("fail_mode")) {
        c.safety.fail_mode = fail_mode_from_string(s["fail_mode"].get<std::string>());
      }
      validate(c.safety);
    }
    if (j.contains("style")) {
      json style = j["style"];
      if (style.contains("font_ref")) {
        style["font_ref"] = resolve(base, style["font_ref"].get<std::string>()).string();
      }
      c.style = render_style_from_json(style, c.style);
    }
    if (j.contains("catalog")) c.catalog_path = resolve(base, j["catalog"].get<std::string>());
    if (j.contains("demo_pool")) c.demo_pool_path = resolve(base, j["demo_pool"].get<std::string>());
    c.parallelism = j.value("parallelism", c.parallelism);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.max_attempts = j.value("max_attempts", c.max_attempts);
    c.n_demos = j.value("n_demos", c.n_demos);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("config: ") + e.what());
  }
  if (c.parallelism < 1 || c.max_in_flight < 1 || c.max_attempts < 1 || c.n_demos < 1) {
    throw Error(Errc::ConfigError, "parallelism, max_in_flight, max_attempts and n_demos must be >= 1");
  }
  return c;
}

json to_json(const RunConfig& c) {
  json backends = json::array();
  for (const auto& [_, b] : c.backends) backends.push_back(to_json(b));
  return {{"backends", std::move(backends)},
          {"describer", to_string(c.describer)},
          {"safety",
           {{"classifier_url", c.safety.classifier_url},
            {"threshold", c.safety.threshold},
            {"fail_mode", c.safety.fail_mode == FailMode::Closed ? "Closed" : "Open"},
            {"timeout_ms", c.safety.timeout_ms}}},
          {"style", to_json(c.style)},
          {"catalog", c.catalog_path.string()},
          {"demo_pool", c.demo_pool_path.string()},
          {"parallelism", c.parallelism},
          {"max_in_flight", c.max_in_flight},
          {"max_attempts", c.max_attempts},
          {"n_demos", c.n_demos}};
}

// ---------------------------------------------------------------------------
// Run

fs::path run_dir(const RunOptions& options) { return options.out_dir / options.run_id; }

fs::path manifest_path(const fs::path& dir) { return dir / "manifest.jsonl"; }

std::vector<MemeArtifact> read_manifest(const fs::path& path) {
  std::map<std::string, MemeArtifact> latest;
  for (const auto& j : read_jsonl(path)) {
    try {
      MemeArtifact a = meme_artifact_from_json(j);
      std::string id = a.meme_id;
      latest.insert_or_assign(std::move(id), std::move(a));
    } catch (const std::exception& e) {
      spdlog::warn("manifest {}: skipping malformed record: {}", path.string(), e.what());
    }
  }
  std::vector<MemeArtifact> out;
  out.reserve(latest.size());
  for (auto& [_, a] : latest) out.push_back(std::move(a));
  return out;
}

namespace {

struct WorkItem {
  const CampaignSpec* spec;
  int index;
  std::string meme_id;
};

std::string sniff_mime(std::string_view bytes) {
  return bytes.starts_with("\xFF\xD8") ? "image/jpeg" : "image/png";
}

void preflight(const CampaignPlan& plan, const RunConfig& config, const RunContext& ctx) {
  if (!ctx.catalog || !ctx.taxonomy || !ctx.demos || !ctx.font || !ctx.gateway ||
      !ctx.classifier || !ctx.descriptions) {
    throw Error(Errc::ConfigError, "run context is incomplete");
  }
  validate(config.style);
  validate(config.safety);
  if (config.parallelism < 1 || config.max_attempts < 1 || config.n_demos < 1) {
    throw Error(Errc::ConfigError, "parallelism, max_attempts and n_demos must be >= 1");
  }
  auto describer = config.backends.find(config.describer);
  if (describer == config.backends.end()) {
    throw Error(Errc::ConfigError, "no configuration for describer backend");
  }
  if (!describer->second.image_capable) {
    throw Error(Errc::CapabilityError, "describer backend must be image-capable");
  }
  check_plan(plan, *ctx.taxonomy);
  for (const auto& spec : plan.cells) {
    auto it = config.backends.find(spec.backend_id);
    if (it == config.backends.end()) {
      throw Error(Errc::UnknownBackend,
                  "no configuration for backend " + std::string(to_string(spec.backend_id)));
    }
    validate(it->second);
    if (!it->second.image_capable &&
        ctx.demos->demos(spec.cause_id, spec.stance).size() < config.n_demos) {
      throw Error(Errc::InsufficientDemos, "demo pool too small for " + cell_key(spec.cell()));
    }
  }
}

MemeArtifact process_one(const WorkItem& item, const RunConfig& config, const RunContext& ctx,
                         const RunOptions& options) {
  const CampaignSpec& spec = *item.spec;
  const BackendConfig& backend = config.backends.at(spec.backend_id);
  MemeArtifact art;
  art.meme_id = item.meme_id;
  art.cell = spec;
  art.provenance.backend_id = spec.backend_id;
  art.provenance.started_at = utc_now_iso();
  try {
    const MemeTemplate& tmpl =
        draw_template(*ctx.catalog, derive_seed(options.seed ^ spec.seed, item.meme_id));
    art.template_id = tmpl.template_id;
    const ImageDescription desc = describe_template(tmpl, config.backends.at(config.describer),
                                                    *ctx.gateway, *ctx.descriptions,
                                                    config.max_attempts);
    const std::string image_bytes = load_template_image(tmpl);

    PromptBundle bundle;
    std::optional<ImageAttachment> image;
    if (backend.image_capable) {
      bundle = build_zeroshot_prompt(*ctx.taxonomy, spec.cell(), tmpl, desc.text);
      image = ImageAttachment{sniff_mime(image_bytes), image_bytes};
    } else {
      bundle = build_fewshot_prompt(*ctx.taxonomy, spec.cell(), tmpl, desc.text,
                                    ctx.demos->demos(spec.cause_id, spec.stance), config.n_demos);
    }
    GenerationRecord rec = generate_meme_text(bundle, spec.cell(), tmpl.template_id, backend,
                                              *ctx.gateway, config.max_attempts, image,
                                              item.meme_id);
    art.provenance.prompt_digest = rec.prompt_digest;
    art.provenance.raw_text_digest = sha256_hex(rec.raw_text);
    art.provenance.parse_outcome = std::string(to_string(rec.parse_outcome));
    art.provenance.attempts = rec.attempt;
    if (rec.parse_outcome == ParseOutcome::Failed) {
      art.status = MemeStatus::FailedParse;
    } else {
      art.captions = rec.captions;
      const RenderedMeme rendered = render_meme(image_bytes, *rec.captions, config.style, *ctx.font);
      art.safety = score_meme(rendered.png_bytes, *rec.captions, config.safety, *ctx.classifier);
      if (art.safety->flagged) {
        art.status = MemeStatus::RejectedHateful;
      } else {
        const std::string rel = options.run_id + "/" + item.meme_id + ".png";
        write_file_atomic(options.out_dir / rel, rendered.png_bytes);
        art.image_path = rel;
        art.status = MemeStatus::Kept;
      }
    }
  } catch (const Error& e) {
    art.status = MemeStatus::FailedParse;
    art.captions.reset();
    art.safety.reset();
    art.image_path.reset();
    art.provenance.failure_reason = fmt::format("{}: {}", to_string(e.code()), e.what());
    spdlog::warn("meme {} failed: {}", item.meme_id, *art.provenance.failure_reason);
  }
  art.provenance.finished_at = utc_now_iso();
  return art;
}

}  // namespace

RunResult run_campaign(const CampaignPlan& plan, const RunConfig& config, const RunContext& ctx,
                       const RunOptions& options) {
  if (options.run_id.empty() || options.run_id.find('/') != std::string::npos) {
    throw Error(Errc::ConfigError, "run_id must be a nonempty single path component");
  }
  preflight(plan, config, ctx);
  const fs::path dir = run_dir(options);
  fs::create_directories(dir);
  const fs::path manifest = manifest_path(dir);

  std::set<std::string> done;
  for (const auto& a : read_manifest(manifest)) done.insert(a.meme_id);

  RunResult result;
  std::vector<WorkItem> work;
  std::set<std::string> planned;
  for (const auto& spec : plan.cells) {
    for (int i = 0; i < spec.count; ++i) {
      std::string id = make_meme_id(spec, i);
      planned.insert(id);
      if (done.contains(id)) {
        ++result.skipped_existing;
      } else {
        work.push_back({&spec, i, std::move(id)});
      }
    }
  }
  spdlog::info("run {}: {} planned, {} already done, {} to process", options.run_id,
               planned.size(), result.skipped_existing, work.size());

  JsonlAppender sink(manifest);
  std::atomic<std::size_t> next{0};
  std::atomic<int> processed{0};
  std::atomic<bool> abort{false};
  std::mutex error_mu;
  std::exception_ptr first_error;
  const int limit = options.stop_after.value_or(-1);

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= work.size()) return;
      if (limit >= 0 && static_cast<int>(i) >= limit) return;
      try {
        MemeArtifact art = process_one(work[i], config, ctx, options);
        sink.append(to_json(art));
        ++processed;
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        abort = true;
        return;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const int n = std::max(1, std::min<int>(config.parallelism, static_cast<int>(work.size())));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  result.newly_processed = processed.load();
  result.records = read_manifest(manifest);
  std::size_t terminal = 0;
  for (const auto& a : result.records) terminal += planned.contains(a.meme_id) ? 1 : 0;
  result.completed = terminal == planned.size();
  if (!options.stop_after) {
    std::vector<json> compacted;
    compacted.reserve(result.records.size());
    for (const auto& a : result.records) compacted.push_back(to_json(a));
    write_jsonl_atomic(manifest, compacted);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Stats

namespace {

void tally(CellStats& s, MemeStatus status) {
  switch (status) {
    case MemeStatus::Kept: ++s.kept; break;
    case MemeStatus::RejectedHateful: ++s.rejected_hateful; break;
    case MemeStatus::FailedParse: ++s.failed_parse; break;
  }
}

void finish(CellStats& s) {
  const int denom = s.kept + s.rejected_hateful;
  if (denom > 0) s.machine_hatefulness_rate = static_cast<double>(s.rejected_hateful) / denom;
}

json stats_json(const CellStats& s) {
  json j = {{"kept", s.kept}, {"rejected_hateful", s.rejected_hateful},
            {"failed_parse", s.failed_parse}};
  j["machine_hatefulness_rate"] =
      s.machine_hatefulness_rate ? json(*s.machine_hatefulness_rate) : json(nullptr);
  return j;
}

}  // namespace

RunStats run_stats(const std::vector<MemeArtifact>& manifest) {
  if (manifest.empty()) throw Error(Errc::EmptyManifest, "manifest has no records");
  RunStats stats;
  for (const auto& a : manifest) {
    tally(stats.global, a.status);
    tally(stats.per_cell[std::string(to_string(a.cell.backend_id)) + "|" + cell_key(a.cell.cell())],
          a.status);
  }
  finish(stats.global);
  for (auto& [_, s] : stats.per_cell) finish(s);
  return stats;
}

json to_json(const RunStats& stats) {
  json cells = json::object();
  for (const auto& [k, s] : stats.per_cell) cells[k] = stats_json(s);
  return {{"global", stats_json(stats.global)}, {"per_cell", std::move(cells)}};
}

}  // namespace memeforge
