// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "memeforge/captions.hpp"
#include "memeforge/catalog.hpp"
#include "memeforge/error.hpp"
#include "memeforge/eval.hpp"
#include "memeforge/gateway.hpp"
#include "memeforge/orchestrator.hpp"
#include "memeforge/prompts.hpp"
#include "memeforge/review.hpp"
#include "memeforge/safety.hpp"
#include "memeforge/stub_server.hpp"
#include "memeforge/text.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace memeforge;

namespace {

RunConfig load_config(const std::string& path) {
  const fs::path data_dir = MEMEFORGE_DATA_DIR;
  return path.empty() ? default_run_config(data_dir) : load_run_config(path, data_dir);
}

json read_json_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw Error(Errc::FileMissing, "not found: " + path.string());
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::SchemaError, "invalid JSON: " + path.string());
  return j;
}

void emit(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    write_file_atomic(out, j.dump(2) + "\n");
  }
}

void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  int sig = 0;
  sigwait(&set, &sig);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("memeforge"));
  spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");

  CLI::App app{"Generate, filter and evaluate captioned memes for social-cause campaigns"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a template catalog");
  std::string catalog_path, ingest_out;
  ingest->add_option("--catalog", catalog_path, "Catalog CSV")->required();
  ingest->add_option("--out", ingest_out, "Write the parsed catalog as JSON");

  // plan
  auto* plan = app.add_subcommand("plan", "Write the full campaign plan");
  std::vector<std::string> models;
  int per_cell = 100;
  std::string plan_out;
  plan->add_option("--models", models, "Backend ids (chatgpt-like, llama-like, llava-like, stub)")
      ->required()
      ->delimiter(',');
  plan->add_option("--per-cell", per_cell, "Memes per cell")->check(CLI::PositiveNumber);
  plan->add_option("--out", plan_out, "Plan JSON path (stdout when omitted)");

  // run
  auto* run = app.add_subcommand("run", "Execute a plan");
  std::string run_plan, run_id, out_dir = "runs", config_path, replay_path;
  std::uint64_t seed = 0;
  bool stub = false, live = false;
  std::optional<int> stop_after;
  run->add_option("--plan", run_plan, "Plan JSON")->required();
  run->add_option("--run-id", run_id, "Run identifier")->required();
  auto* stub_flag = run->add_flag("--stub", stub, "Use the in-process stub model and classifier");
  auto* live_flag = run->add_flag("--live", live, "Call the configured endpoints");
  stub_flag->excludes(live_flag);
  run->add_option("--seed", seed, "Run seed");
  run->add_option("--out-dir", out_dir, "Output root");
  run->add_option("--config", config_path, "JSON config file");
  run->add_option("--replay", replay_path, "Record model exchanges to this JSONL file");
  run->add_option("--stop-after", stop_after, "Stop after N new memes (no compaction)");

  // stats
  auto* stats = app.add_subcommand("stats", "Summarize a run manifest");
  std::string stats_run_id, stats_out_dir = "runs";
  stats->add_option("--run-id", stats_run_id, "Run identifier")->required();
  stats->add_option("--out-dir", stats_out_dir, "Output root");

  // assign
  auto* assign = app.add_subcommand("assign", "Assign kept memes to evaluators");
  std::string assign_run_id, assign_out_dir = "runs", evaluators_path, assign_baselines;
  int k = 2;
  std::uint64_t assign_seed = 0;
  assign->add_option("--run-id", assign_run_id, "Run identifier")->required();
  assign->add_option("--out-dir", assign_out_dir, "Output root");
  assign->add_option("--evaluators", evaluators_path,
                     "JSON array of {evaluator_id, display_name, token_ref}")
      ->required();
  assign->add_option("--baselines", assign_baselines, "Baseline memes to include");
  assign->add_option("--k", k, "Evaluators per meme");
  assign->add_option("--seed", assign_seed, "Assignment seed");

  // report
  auto* report = app.add_subcommand("report", "Compute evaluation tables");
  std::string report_run_id, report_out_dir = "runs", ratings_path, baselines_path, report_dir,
                                 report_config;
  report->add_option("--run-id", report_run_id, "Run identifier")->required();
  report->add_option("--out-dir", report_out_dir, "Output root");
  report->add_option("--ratings", ratings_path, "Ratings JSONL (default <run>/ratings.jsonl)");
  report->add_option("--baselines", baselines_path, "Baseline memes JSON");
  report->add_option("--report-dir", report_dir, "Where to write tables (default <run>/report)");
  report->add_option("--config", report_config, "JSON config file (backend display names)");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve the rating API");
  std::string review_path, host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--config", review_path, "Review service JSON config")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  // stub-server
  auto* stubsrv = app.add_subcommand("stub-server", "Serve stub chat, classifier and overlay endpoints");
  std::string stub_host = "127.0.0.1";
  int stub_port = 8090;
  stubsrv->add_option("--host", stub_host, "Bind address");
  stubsrv->add_option("--port", stub_port, "Port");

  // prompt
  auto* prompt = app.add_subcommand("prompt", "Render the prompt for one cell");
  std::string p_cause, p_stance, p_technique, p_template, p_description, p_config;
  bool zero_shot = false;
  prompt->add_option("--cause", p_cause, "Cause id")->required();
  prompt->add_option("--stance", p_stance, "Support or Deny")->required();
  prompt->add_option("--technique", p_technique, "Technique")->required();
  prompt->add_option("--template-name", p_template, "Template name")->required();
  prompt->add_option("--description", p_description, "Template description")->required();
  prompt->add_flag("--zero-shot", zero_shot, "Zero-shot form");
  prompt->add_option("--config", p_config, "JSON config file");

  CLI11_PARSE(app, argc, argv);
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*ingest) {
      Catalog catalog = ingest_catalog(catalog_path, &std::cerr);
      std::cerr << "templates=" << catalog.size() << " skipped=" << catalog.skipped.size()
                << " rows=" << catalog.data_rows << " digest=" << catalog.source_digest << "\n";
      if (!ingest_out.empty()) emit(to_json(catalog), ingest_out);
      return 0;
    }
    if (*plan) {
      emit(to_json(plan_full_campaign(models, per_cell)), plan_out);
      return 0;
    }
    if (*run) {
      if (!stub && !live) throw Error(Errc::ConfigError, "choose --stub or --live");
      const RunConfig config = load_config(config_path);
      const Taxonomy& taxonomy = Taxonomy::builtin();
      const CampaignPlan campaign = campaign_plan_from_json(read_json_file(run_plan), taxonomy);
      const Catalog catalog = ingest_catalog(config.catalog_path, &std::cerr);
      const DemoPool demos = DemoPool::load(config.demo_pool_path);
      auto font = Font::load(config.style.font_ref);

      GatewayOptions gopts;
      gopts.max_in_flight = config.max_in_flight;
      gopts.replay_path = replay_path;
      std::shared_ptr<Transport> transport;
      if (stub) {
        transport = std::make_shared<StubChatTransport>();
      } else {
        transport = make_http_transport();
      }
      ModelGateway gateway(transport, gopts);
      std::unique_ptr<Classifier> classifier;
      if (stub) {
        classifier = std::make_unique<StubClassifier>();
      } else {
        classifier = std::make_unique<HttpClassifier>(make_http_transport(), config.safety);
      }
      fs::create_directories(out_dir);
      DescriptionCache descriptions(fs::path(out_dir) / "descriptions.jsonl");

      RunContext ctx{&catalog, &taxonomy, &demos, font, &gateway, classifier.get(), &descriptions};
      RunOptions options{run_id, out_dir, seed, stop_after};
      RunResult result = run_campaign(campaign, config, ctx, options);
      std::cerr << "processed=" << result.newly_processed << " skipped=" << result.skipped_existing
                << " completed=" << (result.completed ? "true" : "false") << "\n";
      std::cout << to_json(run_stats(result.records)).dump(2) << "\n";
      return 0;
    }
    if (*stats) {
      RunOptions o{stats_run_id, stats_out_dir, 0, {}};
      std::cout << to_json(run_stats(read_manifest(manifest_path(run_dir(o))))).dump(2) << "\n";
      return 0;
    }
    if (*assign) {
      RunOptions o{assign_run_id, assign_out_dir, 0, {}};
      std::vector<std::string> ids;
      for (const auto& a : read_manifest(manifest_path(run_dir(o)))) {
        if (a.status == MemeStatus::Kept) ids.push_back(a.meme_id);
      }
      if (!assign_baselines.empty()) {
        for (const auto& b : load_baselines(assign_baselines)) ids.push_back(b.meme_id);
      }
      std::vector<Evaluator> evaluators;
      for (const auto& e : read_json_file(evaluators_path)) {
        evaluators.push_back({e.at("evaluator_id").get<std::string>(),
                              e.value("display_name", std::string{}),
                              e.value("token_ref", std::string{})});
      }
      std::vector<json> records;
      for (const auto& a : make_assignments(ids, evaluators, k, assign_seed)) {
        records.push_back(to_json(a));
      }
      const fs::path path = run_dir(o) / "assignments.jsonl";
      write_jsonl_atomic(path, records);
      std::cerr << "assigned " << ids.size() << " memes to " << evaluators.size()
                << " evaluators -> " << path.string() << "\n";
      return 0;
    }
    if (*report) {
      RunOptions o{report_run_id, report_out_dir, 0, {}};
      const fs::path dir = run_dir(o);
      const RunConfig config = load_config(report_config);
      std::map<BackendKind, std::string> names;
      for (const auto& [kind, b] : config.backends) names[kind] = b.display_name;
      auto memes = meme_info_from_manifest(read_manifest(manifest_path(dir)), names);
      if (!baselines_path.empty()) {
        for (auto& b : load_baselines(baselines_path)) memes.push_back(std::move(b));
      }
      RatingsStore store(ratings_path.empty() ? dir / "ratings.jsonl" : fs::path(ratings_path));
      const MetricsReport r = build_report(store.latest(), memes);
      const fs::path out = report_dir.empty() ? dir / "report" : fs::path(report_dir);
      write_report(r, out);
      std::cout << render_report_text(r);
      return 0;
    }
    if (*serve) {
      const fs::path cfg_path = review_path;
      ReviewService service(review_config_from_json(read_json_file(cfg_path),
                                                    fs::absolute(cfg_path).parent_path()));
      ReviewServer server(service);
      spdlog::info("review service on http://{}:{}", host, port);
      server.listen(host, port);
      return 0;
    }
    if (*stubsrv) {
      StubServer server;
      const int bound = server.start(stub_host, stub_port);
      spdlog::info("stub endpoints on http://{}:{} (chat, classify, caption_image)", stub_host,
                   bound);
      wait_for_signal();
      server.stop();
      return 0;
    }
    if (*prompt) {
      const RunConfig config = load_config(p_config);
      const Taxonomy& taxonomy = Taxonomy::builtin();
      CampaignCell cell{p_cause, stance_from_string(p_stance), technique_from_string(p_technique)};
      MemeTemplate tmpl;
      tmpl.name = p_template;
      PromptBundle bundle;
      if (zero_shot) {
        bundle = build_zeroshot_prompt(taxonomy, cell, tmpl, p_description);
      } else {
        const DemoPool demos = DemoPool::load(config.demo_pool_path);
        bundle = build_fewshot_prompt(taxonomy, cell, tmpl, p_description,
                                      demos.demos(cell.cause_id, cell.stance), config.n_demos);
      }
      std::cout << bundle.rendered_text;
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
