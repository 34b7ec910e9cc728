// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <fstream>

#include <gtest/gtest.h>
#include <httplib.h>

#include "memeforge/error.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/review.hpp"
#include "stub_run.hpp"

namespace memeforge {
namespace {

using nlohmann::json;
using testing::TempDir;

// A small stub campaign on disk plus an assignments file over its memes.
struct ReviewFixture {
  TempDir dir;
  std::vector<MemeArtifact> memes;
  std::vector<Assignment> assignments;
  std::atomic<std::int64_t> now{100};

  explicit ReviewFixture(int n_memes = 10, int k = 2) {
    testing::StubRun run;
    auto result = run.run(testing::stub_plan(1), dir.path(), "r1", 7);
    for (const auto& a : result.records) {
      if (a.image_path) memes.push_back(a);
    }
    std::vector<std::string> ids;
    for (int i = 0; i < n_memes && i < static_cast<int>(memes.size()); ++i) ids.push_back(memes[i].meme_id);
    assignments = make_assignments(ids, {{"e0", "", ""}, {"e1", "", ""}, {"e2", "", ""}}, k, 1);
    JsonlAppender out(dir / "assignments.jsonl");
    for (const auto& a : assignments) out.append(to_json(a));
  }

  ReviewConfig config() const {
    json tokens = {{"admin_token", "admin-secret"},
                   {"image_dir", "r1"},
                   {"assignments", "assignments.jsonl"},
                   {"ratings", "ratings.jsonl"},
                   {"manifest", manifest_path(dir / "r1").string()},
                   {"evaluators",
                    {{{"evaluator_id", "e0"}, {"token", "tok-e0"}},
                     {{"evaluator_id", "e1"}, {"token", "tok-e1"}},
                     {{"evaluator_id", "e2"}, {"token", "tok-e2"}, {"expires_at", 1000}}}}};
    return review_config_from_json(tokens, dir.path());
  }

  std::unique_ptr<ReviewService> service() {
    return std::make_unique<ReviewService>(config(), [this] { return now.load(); });
  }

  std::vector<std::string> assigned_to(const std::string& e) const {
    std::vector<std::string> out;
    for (const auto& a : assignments) {
      if (std::find(a.evaluator_ids.begin(), a.evaluator_ids.end(), e) != a.evaluator_ids.end()) {
        out.push_back(a.meme_id);
      }
    }
    return out;
  }
};

std::string rating_body(const std::string& meme, int hilarity = 3, bool auth = true) {
  return json{{"meme_id", meme},   {"authenticity", auth}, {"hilarity", hilarity},
              {"conveyance", "Support"}, {"persuasiveness", 4}, {"hateful", false}}
      .dump();
}

TEST(Review, TaskFlowUntilNoneLeft) {
  ReviewFixture f(3, 2);  // 6 slots over 3 evaluators: 2 each
  auto svc = f.service();
  const auto mine = f.assigned_to("e0");
  ASSERT_EQ(mine.size(), 2u);
  auto t = svc->next_task("tok-e0");
  ASSERT_EQ(t.status, 200);
  EXPECT_EQ(t.body["status"], "task");
  EXPECT_EQ(t.body["remaining"], 2);
  EXPECT_EQ(t.body["image_url"], "/memes/" + t.body["meme_id"].get<std::string>() + ".png");
  for (int i = 0; i < 2; ++i) {
    auto task = svc->next_task("tok-e0");
    auto r = svc->submit_rating("tok-e0", rating_body(task.body["meme_id"]));
    ASSERT_EQ(r.status, 200) << r.body.dump();
    EXPECT_EQ(r.body["remaining"], 1 - i);
  }
  auto done = svc->next_task("tok-e0");
  EXPECT_EQ(done.status, 200);
  EXPECT_EQ(done.body["status"], "none_left");
  EXPECT_EQ(done.body["remaining"], 0);
}

TEST(Review, TaskPayloadsAreBlind) {
  ReviewFixture f;
  auto svc = f.service();
  std::vector<std::string> forbidden = {"stance", "technique", "backend", "safety", "score", "Support",
                                        "Deny", "stub", "threshold", "flagged"};
  for (Technique t : kAllTechniques) forbidden.emplace_back(to_string(t));
  for (const char* tok : {"tok-e0", "tok-e1", "tok-e2"}) {
    while (true) {
      auto task = svc->next_task(tok);
      ASSERT_EQ(task.status, 200);
      const std::string payload = task.body.dump();
      for (const auto& word : forbidden) {
        EXPECT_EQ(payload.find(word), std::string::npos) << word << " in " << payload;
      }
      if (task.body["status"] == "none_left") break;
      EXPECT_TRUE(task.body["cause"] == "Climate Action" || task.body["cause"] == "Gender Equality");
      ASSERT_EQ(svc->submit_rating(tok, rating_body(task.body["meme_id"])).status, 200);
    }
  }
}

TEST(Review, DuplicateSubmissionIsIdempotent) {
  ReviewFixture f;
  auto svc = f.service();
  const auto meme = f.assigned_to("e1").front();
  auto first = svc->submit_rating("tok-e1", rating_body(meme));
  auto again = svc->submit_rating("tok-e1", rating_body(meme));
  EXPECT_EQ(first.body["stored"], true);
  EXPECT_EQ(again.status, 200);
  EXPECT_EQ(again.body["stored"], false);
  EXPECT_EQ(read_jsonl(f.dir / "ratings.jsonl").size(), 1u);
  auto changed = svc->submit_rating("tok-e1", rating_body(meme, 5));
  EXPECT_EQ(changed.body["stored"], true);
  EXPECT_EQ(svc->ratings().size(), 1u);
  EXPECT_EQ(svc->ratings()[0].hilarity, 5);
}

TEST(Review, InvalidRatingsAreRejectedAndNotPersisted) {
  ReviewFixture f;
  auto svc = f.service();
  const auto meme = f.assigned_to("e0").front();
  EXPECT_EQ(svc->submit_rating("tok-e0", rating_body(meme, 6)).status, 422);
  EXPECT_EQ(svc->submit_rating("tok-e0", rating_body(meme, 0)).status, 422);
  auto j = json::parse(rating_body(meme));
  j["conveyance"] = "Maybe";
  EXPECT_EQ(svc->submit_rating("tok-e0", j.dump()).status, 422);
  j = json::parse(rating_body(meme));
  j.erase("hateful");
  EXPECT_EQ(svc->submit_rating("tok-e0", j.dump()).status, 422);
  EXPECT_EQ(svc->submit_rating("tok-e0", "{not json").status, 400);
  EXPECT_TRUE(svc->ratings().empty());
  EXPECT_TRUE(read_jsonl(f.dir / "ratings.jsonl").empty());
}

TEST(Review, UnassignedMemeAndForeignEvaluatorAreForbidden) {
  ReviewFixture f;
  auto svc = f.service();
  const auto mine = f.assigned_to("e0");
  std::string other;
  for (const auto& a : f.assignments) {
    if (std::find(mine.begin(), mine.end(), a.meme_id) == mine.end()) other = a.meme_id;
  }
  ASSERT_FALSE(other.empty());
  auto r = svc->submit_rating("tok-e0", rating_body(other));
  EXPECT_EQ(r.status, 403);
  EXPECT_EQ(r.body["code"], "not_assigned");
  EXPECT_EQ(svc->submit_rating("tok-e0", rating_body("mf-doesnotexist")).status, 403);
  auto j = json::parse(rating_body(mine.front()));
  j["evaluator_id"] = "e1";
  EXPECT_EQ(svc->submit_rating("tok-e0", j.dump()).status, 403);
  EXPECT_TRUE(svc->ratings().empty());
}

TEST(Review, AuthenticationAndExpiry) {
  ReviewFixture f;
  auto svc = f.service();
  EXPECT_EQ(svc->next_task("").status, 401);
  EXPECT_EQ(svc->next_task("nope").status, 401);
  EXPECT_EQ(svc->next_task("admin-secret").status, 401);
  EXPECT_EQ(svc->progress("tok-e0").status, 401);
  EXPECT_EQ(svc->progress("admin-secret").status, 200);

  const auto meme = f.assigned_to("e2").front();
  EXPECT_EQ(svc->next_task("tok-e2").status, 200);
  f.now = 999;
  EXPECT_EQ(svc->next_task("tok-e2").status, 200);
  f.now = 1000;
  EXPECT_EQ(svc->next_task("tok-e2").status, 401);
  EXPECT_EQ(svc->submit_rating("tok-e2", rating_body(meme)).status, 401);
  EXPECT_TRUE(svc->ratings().empty());
  EXPECT_EQ(svc->next_task("tok-e0").status, 200);  // no expiry set

  EXPECT_EQ(bearer_token("Bearer abc"), "abc");
  EXPECT_EQ(bearer_token("bearer   abc  "), "abc");
  EXPECT_EQ(bearer_token("Basic abc"), "");
  EXPECT_EQ(bearer_token(""), "");
}

TEST(Review, ConfigValidation) {
  ReviewFixture f;
  json j = {{"admin_token", "a"}, {"evaluators", {{{"evaluator_id", "e0"}, {"token", "a"}}}}};
  EXPECT_THROW(review_config_from_json(j, f.dir.path()), Error);
  j = {{"admin_token", ""}, {"evaluators", json::array()}};
  EXPECT_THROW(review_config_from_json(j, f.dir.path()), Error);
  EXPECT_THROW(review_config_from_json(json{{"evaluators", json::array()}}, f.dir.path()), Error);
  auto cfg = f.config();
  EXPECT_EQ(cfg.assignments_path, f.dir / "assignments.jsonl");
  cfg.assignments_path = f.dir / "missing.jsonl";
  EXPECT_THROW(ReviewService svc(cfg), Error);
}

TEST(Review, ProgressMatchesStoreRecount) {
  ReviewFixture f;
  auto svc = f.service();
  int submitted = 0;
  for (const char* e : {"e0", "e1"}) {
    const auto mine = f.assigned_to(e);
    for (std::size_t i = 0; i < mine.size(); i += 2) {
      ASSERT_EQ(svc->submit_rating(std::string("tok-") + e, rating_body(mine[i])).status, 200);
      ++submitted;
    }
  }
  auto p = svc->progress("admin-secret");
  ASSERT_EQ(p.status, 200);
  EXPECT_EQ(p.body["total_slots"], 20);
  EXPECT_EQ(p.body["done_slots"], submitted);

  RatingsStore recount(f.dir / "ratings.jsonl");
  std::map<std::string, int> per_evaluator;
  for (const auto& r : recount.latest()) ++per_evaluator[r.evaluator_id];
  for (const auto& e : p.body["evaluators"]) {
    const std::string id = e["evaluator_id"];
    EXPECT_EQ(e["done"], per_evaluator[id]) << id;
    EXPECT_EQ(e["assigned"], static_cast<int>(f.assigned_to(id).size())) << id;
  }
  int cell_done = 0, cell_assigned = 0;
  for (const auto& c : p.body["cells"]) {
    cell_done += c["done"].get<int>();
    cell_assigned += c["assigned"].get<int>();
    EXPECT_NE(c["cell"], "unknown");
  }
  EXPECT_EQ(cell_done, submitted);
  EXPECT_EQ(cell_assigned, 20);
}

TEST(Review, RestartReplaysRatingsIncludingTornTail) {
  ReviewFixture f(50, 2);  // only 10 memes exist, so 10 assignments
  const auto n_memes = f.assignments.size();
  {
    auto svc = f.service();
    // 100 submissions: every slot, then every slot again with a changed score.
    int calls = 0;
    for (int round = 0; round < 5 && calls < 100; ++round) {
      for (const auto& a : f.assignments) {
        for (const auto& e : a.evaluator_ids) {
          if (calls == 100) break;
          ASSERT_EQ(svc->submit_rating("tok-" + e, rating_body(a.meme_id, 1 + round)).status, 200);
          ++calls;
        }
      }
    }
    ASSERT_EQ(calls, 100);
  }
  {
    std::ofstream out(f.dir / "ratings.jsonl", std::ios::app);
    out << R"({"meme_id":"x","hilar)";
  }
  auto svc = f.service();
  EXPECT_EQ(svc->ratings().size(), 2 * n_memes);
  for (const auto& r : svc->ratings()) EXPECT_EQ(r.hilarity, 5);
  for (const char* tok : {"tok-e0", "tok-e1", "tok-e2"}) {
    EXPECT_EQ(svc->next_task(tok).body["status"], "none_left");
  }
  EXPECT_EQ(svc->progress("admin-secret").body["done_slots"], static_cast<int>(2 * n_memes));
  // A write after the torn tail still lands and replays.
  const auto meme = f.assigned_to("e0").front();
  EXPECT_EQ(svc->submit_rating("tok-e0", rating_body(meme, 2)).body["stored"], true);
  svc.reset();
  auto replayed = f.service();
  EXPECT_EQ(replayed->ratings().size(), 2 * n_memes);
}

TEST(ReviewServer, HttpRoundTrip) {
  ReviewFixture f;
  auto svc = f.service();
  ReviewServer server(*svc);
  const int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);
  const httplib::Headers auth = {{"Authorization", "Bearer tok-e0"}};

  auto task = client.Get("/api/task", auth);
  ASSERT_TRUE(task);
  EXPECT_EQ(task->status, 200);
  auto body = json::parse(task->body);
  const std::string meme = body["meme_id"];

  auto img = client.Get(body["image_url"].get<std::string>());
  ASSERT_TRUE(img);
  EXPECT_EQ(img->status, 200);
  EXPECT_EQ(img->get_header_value("Content-Type"), "image/png");
  EXPECT_EQ(img->body, read_file(f.dir / "r1" / (meme + ".png")));

  auto posted = client.Post("/api/rating", auth, rating_body(meme), "application/json");
  ASSERT_TRUE(posted);
  EXPECT_EQ(posted->status, 200);
  auto dup = client.Post("/api/rating", auth, rating_body(meme), "application/json");
  EXPECT_EQ(json::parse(dup->body)["stored"], false);
  EXPECT_EQ(client.Post("/api/rating", auth, rating_body(meme, 6), "application/json")->status, 422);
  EXPECT_EQ(client.Get("/api/task")->status, 401);
  EXPECT_EQ(client.Get("/api/progress", {{"Authorization", "Bearer admin-secret"}})->status, 200);

  EXPECT_EQ(client.Get("/memes/mf-0000000000000000.png")->status, 404);
  for (const char* bad : {"/memes/..%2F..%2Fassignments.png", "/memes/%2E%2E.png", "/memes/../r1.png"}) {
    auto r = client.Get(bad);
    ASSERT_TRUE(r) << bad;
    EXPECT_EQ(r->status, 404) << bad;
  }
  EXPECT_FALSE(svc->meme_image("../assignments"));
  EXPECT_FALSE(svc->meme_image(".."));
  server.stop();
}

}  // namespace
}  // namespace memeforge
