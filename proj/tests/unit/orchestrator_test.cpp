// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/orchestrator.hpp"
#include "stub_run.hpp"

namespace memeforge {
namespace {

using testing::StubRun;
using testing::TempDir;
using testing::stub_plan;
using nlohmann::json;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::IoError;
}

TEST(Plan, FullCampaignTotals) {
  auto plan = plan_full_campaign({"chatgpt-like", "llama-like", "llava-like"}, 100);
  EXPECT_EQ(plan.total, 3000);
  EXPECT_EQ(plan.cells.size(), 30u);
  std::map<std::pair<BackendKind, std::string>, int> per_model_cause;
  for (const auto& c : plan.cells) per_model_cause[{c.backend_id, c.cause_id}] += c.count;
  EXPECT_EQ(per_model_cause.size(), 6u);
  for (const auto& [_, n] : per_model_cause) EXPECT_EQ(n, 500);

  auto one = plan_full_campaign({"chatgpt-like"}, 100);
  EXPECT_EQ(one.total, 1000);
  std::set<Technique> climate;
  for (const auto& c : one.cells) {
    if (c.cause_id == "climate_action") {
      climate.insert(c.technique_id);
      EXPECT_EQ(c.count, 100);
    }
  }
  EXPECT_EQ(climate, (std::set<Technique>{Technique::Causes, Technique::Consequences, Technique::Solutions,
                                          Technique::EvidenceOfAbsence, Technique::Benefits}));
  EXPECT_EQ(plan_full_campaign({"stub"}, 1).total, 10);
  EXPECT_EQ(code_of([] { plan_full_campaign({"gpt-9"}); }), Errc::UnknownBackend);
}

TEST(Plan, JsonRoundTripAndChecks) {
  auto plan = plan_full_campaign({"stub", "llava-like"}, 3);
  auto back = campaign_plan_from_json(to_json(plan), Taxonomy::builtin());
  EXPECT_EQ(back.total, plan.total);
  EXPECT_EQ(to_json(back), to_json(plan));

  auto j = to_json(plan);
  j["total"] = 999;
  EXPECT_EQ(code_of([&] { campaign_plan_from_json(j, Taxonomy::builtin()); }), Errc::SchemaError);
  j = to_json(plan);
  j["cells"].push_back(j["cells"][0]);
  j["total"] = plan.total + 3;
  EXPECT_EQ(code_of([&] { campaign_plan_from_json(j, Taxonomy::builtin()); }), Errc::SchemaError);
  j = to_json(plan);
  j["cells"][0]["stance"] = "Deny";
  j["cells"][0]["technique_id"] = "Causes";
  EXPECT_EQ(code_of([&] { campaign_plan_from_json(j, Taxonomy::builtin()); }),
            Errc::InapplicableTechnique);
}

TEST(MemeId, OpaqueAndUnique) {
  auto plan = plan_full_campaign({"chatgpt-like", "llama-like", "llava-like"}, 20);
  std::set<std::string> ids;
  for (const auto& c : plan.cells) {
    for (int i = 0; i < c.count; ++i) {
      const auto id = make_meme_id(c, i);
      EXPECT_EQ(id.size(), 19u);
      EXPECT_TRUE(id.starts_with("mf-"));
      for (const char* leak : {"Support", "Deny", "climate", "gender", "chatgpt", "Causes"}) {
        EXPECT_EQ(id.find(leak), std::string::npos);
      }
      ids.insert(id);
    }
  }
  EXPECT_EQ(ids.size(), static_cast<std::size_t>(plan.total));
}

TEST(RunCampaign, StubRunOfTenConserves) {
  TempDir dir;
  StubRun h;
  auto result = h.run(stub_plan(1), dir.path(), "r1", 42);
  EXPECT_TRUE(result.completed);
  ASSERT_EQ(result.records.size(), 10u);
  int kept = 0, rejected = 0, failed = 0;
  std::set<std::string> ids;
  for (const auto& a : result.records) {
    ids.insert(a.meme_id);
    switch (a.status) {
      case MemeStatus::Kept:
        ++kept;
        ASSERT_TRUE(a.safety);
        EXPECT_FALSE(a.safety->flagged);
        ASSERT_TRUE(a.image_path);
        EXPECT_TRUE(std::filesystem::is_regular_file(dir.path() / *a.image_path));
        EXPECT_EQ(*a.image_path, "r1/" + a.meme_id + ".png");
        break;
      case MemeStatus::RejectedHateful:
        ++rejected;
        EXPECT_TRUE(a.safety->flagged);
        EXPECT_FALSE(a.image_path);
        break;
      case MemeStatus::FailedParse: ++failed; break;
    }
    if (a.safety) EXPECT_EQ(a.safety->flagged, is_flagged(a.safety->score, a.safety->threshold_used));
    EXPECT_EQ(a.provenance.prompt_digest.size(), 64u);
    EXPECT_FALSE(a.provenance.started_at.empty());
  }
  EXPECT_EQ(kept + rejected + failed, 10);
  EXPECT_EQ(ids.size(), 10u);
  // The manifest on disk is the compacted form.
  EXPECT_EQ(read_jsonl(manifest_path(dir / "r1")).size(), 10u);
}

TEST(RunCampaign, EverySecondFlaggedGivesFiveAndFive) {
  TempDir dir;
  StubRun h(std::make_unique<ScheduledClassifier>(std::vector<double>{0.1, 0.95}));
  auto result = h.run(stub_plan(1), dir.path(), "sched", 1);
  auto stats = run_stats(result.records);
  EXPECT_EQ(stats.global.kept, 5);
  EXPECT_EQ(stats.global.rejected_hateful, 5);
  EXPECT_EQ(stats.global.failed_parse, 0);
  EXPECT_EQ(stats.global.machine_hatefulness_rate, 0.5);
}

TEST(RunCampaign, RerunWithSameSeedIsIdenticalModuloTimestamps) {
  TempDir a, b;
  StubRun h1, h2;
  auto plan = plan_full_campaign({"stub", "llava-like"}, 2);
  auto r1 = h1.run(plan, a.path(), "same", 9);
  auto r2 = h2.run(plan, b.path(), "same", 9);
  auto m1 = read_jsonl(manifest_path(a / "same"));
  auto m2 = read_jsonl(manifest_path(b / "same"));
  ASSERT_EQ(m1.size(), 40u);
  ASSERT_EQ(m1.size(), m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    EXPECT_EQ(without_timestamps(m1[i]), without_timestamps(m2[i]));
  }
  for (const auto& rec : r1.records) {
    if (rec.image_path) {
      EXPECT_EQ(read_file(a.path() / *rec.image_path), read_file(b.path() / *rec.image_path));
    }
  }
  // A different seed changes template draws.
  TempDir c;
  StubRun h3;
  h3.run(plan, c.path(), "same", 10);
  auto m3 = read_jsonl(manifest_path(c / "same"));
  int differing = 0;
  for (std::size_t i = 0; i < m1.size(); ++i) differing += m1[i]["template_id"] != m3[i]["template_id"];
  EXPECT_GT(differing, 0);
}

TEST(RunCampaign, InterruptAndResumeHasNoDuplicates) {
  TempDir dir;
  const auto plan = stub_plan(3);
  {
    StubRun h;
    auto partial = h.run(plan, dir.path(), "resume", 5, 7);
    EXPECT_EQ(partial.newly_processed, 7);
    EXPECT_FALSE(partial.completed);
  }
  // A crash mid-write leaves a torn line behind.
  {
    std::ofstream out(manifest_path(dir / "resume"), std::ios::app);
    out << R"({"meme_id":"mf-torn","cell":{"cause)";
  }
  StubRun h;
  auto result = h.run(plan, dir.path(), "resume", 5);
  EXPECT_TRUE(result.completed);
  EXPECT_EQ(result.skipped_existing, 7);
  EXPECT_EQ(result.newly_processed, 23);
  auto lines = read_jsonl(manifest_path(dir / "resume"));
  std::set<std::string> ids;
  for (const auto& j : lines) EXPECT_TRUE(ids.insert(j["meme_id"].get<std::string>()).second);
  EXPECT_EQ(ids.size(), 30u);
}

TEST(RunCampaign, GatewayFailuresAreRecordedNotFatal) {
  TempDir dir;
  StubRun h(std::make_unique<StubClassifier>(), StubBehavior{.fail_first = 1000, .failure_status = 503});
  h.config.backends[BackendKind::Stub].max_retries = 0;
  h.config.backends[BackendKind::LlavaLike].max_retries = 0;
  auto result = h.run(stub_plan(1), dir.path(), "down", 1);
  ASSERT_EQ(result.records.size(), 10u);
  for (const auto& a : result.records) {
    EXPECT_EQ(a.status, MemeStatus::FailedParse);
    ASSERT_TRUE(a.provenance.failure_reason);
    EXPECT_TRUE(a.provenance.failure_reason->starts_with("Unavailable")) << *a.provenance.failure_reason;
  }
  auto stats = run_stats(result.records);
  EXPECT_FALSE(stats.global.machine_hatefulness_rate);
  EXPECT_EQ(stats.global.failed_parse, 10);
}

TEST(RunCampaign, GarbageRepliesBecomeFailedParse) {
  TempDir dir;
  StubRun h(std::make_unique<StubClassifier>(), StubBehavior{.fixed_reply = "no markers here"});
  auto result = h.run(stub_plan(1), dir.path(), "garbage", 1);
  for (const auto& a : result.records) {
    EXPECT_EQ(a.status, MemeStatus::FailedParse);
    EXPECT_EQ(a.provenance.parse_outcome, "Failed");
    EXPECT_EQ(a.provenance.attempts, 3);
    EXPECT_FALSE(a.provenance.failure_reason);
  }
}

TEST(RunCampaign, VisionBackendGetsZeroShotWithImage) {
  TempDir dir;
  StubRun h;
  auto result = h.run(stub_plan(1, BackendKind::LlavaLike), dir.path(), "vlm", 1);
  EXPECT_TRUE(result.completed);
  // Every generation call carries the image, as do description calls.
  EXPECT_EQ(h.transport->calls_with_image(), h.transport->calls());

  TempDir dir2;
  StubRun text_only;
  text_only.run(stub_plan(1), dir2.path(), "llm", 1);
  EXPECT_LT(text_only.transport->calls_with_image(), text_only.transport->calls());
  EXPECT_EQ(text_only.transport->calls() - text_only.transport->calls_with_image(), 10);
}

TEST(RunCampaign, ConfigurationErrorsAbort) {
  TempDir dir;
  StubRun h;
  h.config.backends.erase(BackendKind::Stub);
  EXPECT_EQ(code_of([&] { h.run(stub_plan(1), dir.path(), "x", 1); }), Errc::UnknownBackend);
  StubRun h2;
  h2.config.describer = BackendKind::ChatGptLike;
  EXPECT_EQ(code_of([&] { h2.run(stub_plan(1), dir.path(), "x", 1); }), Errc::CapabilityError);
  StubRun h3;
  EXPECT_EQ(code_of([&] { h3.run(stub_plan(1), dir.path(), "a/b", 1); }), Errc::ConfigError);
}

MemeArtifact artifact(const std::string& id, MemeStatus status, const std::string& cause = "climate_action") {
  MemeArtifact a;
  a.meme_id = id;
  a.cell.cause_id = cause;
  a.cell.backend_id = BackendKind::ChatGptLike;
  a.status = status;
  return a;
}

TEST(RunStats, Cases) {
  std::vector<MemeArtifact> m;
  for (int i = 0; i < 10; ++i) m.push_back(artifact("m" + std::to_string(i), i < 5 ? MemeStatus::Kept : MemeStatus::RejectedHateful));
  EXPECT_EQ(run_stats(m).global.machine_hatefulness_rate, 0.5);

  std::vector<MemeArtifact> failed;
  for (int i = 0; i < 4; ++i) failed.push_back(artifact("f" + std::to_string(i), MemeStatus::FailedParse));
  auto s = run_stats(failed);
  EXPECT_FALSE(s.global.machine_hatefulness_rate);
  EXPECT_EQ(s.global.failed_parse, 4);
  EXPECT_TRUE(to_json(s)["global"]["machine_hatefulness_rate"].is_null());

  // 100 climate memes from one model: 94 kept, 6 rejected, plus failures
  // that must not enter the denominator.
  std::vector<MemeArtifact> climate;
  for (int i = 0; i < 100; ++i) climate.push_back(artifact("c" + std::to_string(i), i < 6 ? MemeStatus::RejectedHateful : MemeStatus::Kept));
  for (int i = 0; i < 7; ++i) climate.push_back(artifact("x" + std::to_string(i), MemeStatus::FailedParse));
  auto cs = run_stats(climate);
  EXPECT_EQ(cs.global.machine_hatefulness_rate, 0.06);
  EXPECT_EQ(cs.per_cell.begin()->second.machine_hatefulness_rate, 0.06);

  EXPECT_EQ(code_of([] { run_stats({}); }), Errc::EmptyManifest);
}

TEST(Manifest, LatestRecordWinsAndTornLinesSkipped) {
  TempDir dir;
  auto a = artifact("m1", MemeStatus::FailedParse);
  auto b = artifact("m1", MemeStatus::Kept);
  {
    JsonlAppender sink(dir / "manifest.jsonl");
    sink.append(to_json(a));
    sink.append(to_json(b));
  }
  {
    std::ofstream out(dir / "manifest.jsonl", std::ios::app);
    out << "{\"meme_id\": \"m2\", \"sta";
  }
  auto m = read_manifest(dir / "manifest.jsonl");
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].status, MemeStatus::Kept);
}

TEST(Manifest, ArtifactJsonRoundTrip) {
  TempDir dir;
  StubRun h;
  auto result = h.run(stub_plan(1), dir.path(), "rt", 3);
  for (const auto& a : result.records) {
    auto j = to_json(a);
    EXPECT_EQ(to_json(meme_artifact_from_json(j)), j);
    for (const char* key : {"meme_id", "cell", "template_id", "captions", "image_path", "safety",
                            "status", "provenance"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    EXPECT_FALSE(without_timestamps(j)["provenance"].contains("timestamps"));
  }
}

TEST(Config, LoadOverlaysDefaults) {
  TempDir dir;
  testing::write_text(dir / "run.json", R"({
    // comments are allowed
    "backends": [{"backend_id": "chatgpt-like", "model_name": "gpt-3.5-turbo",
                  "endpoint_url": "https://api.example.com/v1/chat/completions",
                  "api_key_ref": "OPENAI_API_KEY", "temperature": 0.2}],
    "safety": {"threshold": 0.8, "fail_mode": "Open"},
    "catalog": "my/catalog.csv",
    "parallelism": 2
  })");
  auto c = load_run_config(dir / "run.json", testing::data_dir());
  EXPECT_EQ(c.backends.at(BackendKind::ChatGptLike).model_name, "gpt-3.5-turbo");
  EXPECT_DOUBLE_EQ(c.backends.at(BackendKind::ChatGptLike).temperature, 0.2);
  EXPECT_DOUBLE_EQ(c.safety.threshold, 0.8);
  EXPECT_EQ(c.safety.fail_mode, FailMode::Open);
  EXPECT_EQ(c.catalog_path, (dir / "my" / "catalog.csv").lexically_normal());
  EXPECT_EQ(c.parallelism, 2);
  EXPECT_EQ(c.demo_pool_path, testing::demo_pool_path());

  testing::write_text(dir / "bad.json", R"({"safety": {"threshold": 3}})");
  EXPECT_EQ(code_of([&] { load_run_config(dir / "bad.json", testing::data_dir()); }), Errc::ConfigError);
  EXPECT_EQ(code_of([&] { load_run_config(dir / "none.json", testing::data_dir()); }), Errc::FileMissing);
}

}  // namespace
}  // namespace memeforge
