// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/safety.hpp"
#include "memeforge/stub_server.hpp"
#include "test_support.hpp"

namespace memeforge {
namespace {

const CaptionPair kCaptions{"Waiting for the forests", std::string("to grow back"), std::nullopt};

class FixedClassifier final : public Classifier {
 public:
  explicit FixedClassifier(double s) : s_(s) {}
  double score(const std::string&, const std::string&) override { return s_; }
  std::string id() const override { return "fixed"; }

 private:
  double s_;
};

class DownClassifier final : public Classifier {
 public:
  double score(const std::string&, const std::string&) override {
    throw Error(Errc::Unavailable, "classifier endpoint down");
  }
  std::string id() const override { return "down"; }
};

std::vector<SafetyVerdict> synth(int flagged, int total) {
  std::vector<SafetyVerdict> out;
  for (int i = 0; i < total; ++i) {
    const double s = i < flagged ? 0.95 : 0.1;
    out.push_back({s, is_flagged(s, 0.9), 0.9, "synthetic", std::nullopt});
  }
  return out;
}

TEST(ScoreMeme, ThresholdAndBoundary) {
  SafetyConfig cfg;
  FixedClassifier high(0.95), exact(0.90), low(0.89999);
  EXPECT_TRUE(score_meme("img", kCaptions, cfg, high).flagged);
  auto at = score_meme("img", kCaptions, cfg, exact);
  EXPECT_TRUE(at.flagged);
  EXPECT_DOUBLE_EQ(at.threshold_used, 0.9);
  EXPECT_EQ(at.classifier_id, "fixed");
  EXPECT_FALSE(score_meme("img", kCaptions, cfg, low).flagged);
  EXPECT_FALSE(at.warning);
}

TEST(ScoreMeme, FailClosedAndOpen) {
  DownClassifier down;
  SafetyConfig cfg;
  auto closed = score_meme("img", kCaptions, cfg, down);
  EXPECT_TRUE(closed.flagged);
  EXPECT_DOUBLE_EQ(closed.score, 1.0);
  ASSERT_TRUE(closed.warning);
  cfg.fail_mode = FailMode::Open;
  auto open = score_meme("img", kCaptions, cfg, down);
  EXPECT_FALSE(open.flagged);
  EXPECT_DOUBLE_EQ(open.score, 0.0);
  EXPECT_TRUE(open.warning);
}

TEST(FilterBatch, PartitionsInOrder) {
  std::vector<std::pair<int, SafetyVerdict>> recs;
  int id = 0;
  for (double s : {0.1, 0.95, 0.5}) recs.push_back({id++, {s, is_flagged(s, 0.9), 0.9, "x", {}}});
  auto [kept, rejected] = filter_batch(recs);
  EXPECT_EQ(kept, (std::vector<int>{0, 2}));
  EXPECT_EQ(rejected, (std::vector<int>{1}));

  std::vector<std::pair<int, SafetyVerdict>> zeros;
  for (int i = 0; i < 10; ++i) zeros.push_back({i, {0.0, false, 0.9, "x", {}}});
  EXPECT_TRUE(filter_batch(zeros).second.empty());
  EXPECT_EQ(filter_batch(zeros).first.size(), 10u);
}

TEST(MachineRate, SynthesizedFixtures) {
  EXPECT_EQ(machine_hatefulness_rate(synth(275, 500)), 0.55);
  EXPECT_EQ(machine_hatefulness_rate(synth(6, 100)), 0.06);
  EXPECT_EQ(machine_hatefulness_rate(synth(0, 100)), 0.0);
  EXPECT_EQ(machine_hatefulness_rate(synth(100, 100)), 1.0);
  try {
    machine_hatefulness_rate({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
}

TEST(MachineRate, FixtureThroughTheGate) {
  // 500 memes scored through score_meme so the rate comes from real verdicts.
  std::vector<double> schedule(275, 0.95);
  schedule.resize(500, 0.1);
  ScheduledClassifier cls(schedule);
  SafetyConfig cfg;
  std::vector<SafetyVerdict> vs;
  for (int i = 0; i < 500; ++i) vs.push_back(score_meme("img", kCaptions, cfg, cls));
  EXPECT_EQ(machine_hatefulness_rate(vs), 0.55);
}

TEST(Properties, PartitionMonotonicityAndRecompute) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(1000);
  for (auto& s : scores) s = u(gen);
  scores[0] = 0.9;
  scores[1] = 0.0;
  scores[2] = 1.0;

  std::vector<bool> prev_kept(scores.size(), false);
  for (int step = 0; step <= 100; ++step) {
    const double t = step / 100.0;
    std::vector<std::pair<std::size_t, SafetyVerdict>> recs;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      SafetyConfig cfg;
      cfg.threshold = t;
      FixedClassifier c(scores[i]);
      recs.push_back({i, score_meme("img", kCaptions, cfg, c)});
    }
    auto [kept, rejected] = filter_batch(recs);
    ASSERT_EQ(kept.size() + rejected.size(), scores.size());
    std::vector<bool> is_kept(scores.size(), false);
    for (auto i : kept) is_kept[i] = true;
    for (auto i : rejected) ASSERT_FALSE(is_kept[i]);
    // Raising the threshold never moves a kept meme to rejected.
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (prev_kept[i]) ASSERT_TRUE(is_kept[i]) << i << " at " << t;
    }
    prev_kept = is_kept;
    for (const auto& [i, v] : recs) {
      auto stored = safety_verdict_from_json(to_json(v));
      ASSERT_EQ(stored.flagged, is_flagged(stored.score, stored.threshold_used));
    }
  }
}

TEST(Config, ThresholdValidation) {
  SafetyConfig c;
  EXPECT_NO_THROW(validate(c));
  for (double bad : {-0.01, 1.01}) {
    c.threshold = bad;
    EXPECT_THROW(validate(c), Error);
  }
}

TEST(StubClassifier, KeywordsRaiseScoreAndJitterIsSmall) {
  const double clean = stub_classifier_score("Turning off the lights");
  EXPECT_GE(clean, 0.0);
  EXPECT_LT(clean, 0.05);
  EXPECT_EQ(clean, stub_classifier_score("Turning off the lights"));
  EXPECT_GT(stub_classifier_score("you stupid idiot trash"), 0.9);
  EXPECT_LE(stub_classifier_score("hate hate stupid idiot scum vermin"), 1.0);
  EXPECT_EQ(classifier_text(kCaptions), "Waiting for the forests to grow back");
}

TEST(ScheduledClassifier, Cycles) {
  ScheduledClassifier c({0.1, 0.95});
  EXPECT_EQ(c.score("", ""), 0.1);
  EXPECT_EQ(c.score("", ""), 0.95);
  EXPECT_EQ(c.score("", ""), 0.1);
  EXPECT_EQ(c.calls(), 3);
}

TEST(HttpClassifier, AgainstStubServer) {
  StubServerOptions opts;
  opts.fixed_score = 0.93;
  StubServer server(opts);
  const int port = server.start("127.0.0.1", 0);
  SafetyConfig cfg;
  cfg.classifier_url = "http://127.0.0.1:" + std::to_string(port) + "/classify";
  HttpClassifier cls(make_http_transport(), cfg);
  auto v = score_meme("png bytes", kCaptions, cfg, cls);
  EXPECT_DOUBLE_EQ(v.score, 0.93);
  EXPECT_TRUE(v.flagged);
  EXPECT_EQ(server.classify_calls(), 1);

  server.stop();
  cfg.timeout_ms = 300;
  HttpClassifier gone(make_http_transport(), cfg);
  auto closed = score_meme("png bytes", kCaptions, cfg, gone);
  EXPECT_TRUE(closed.flagged);
  EXPECT_TRUE(closed.warning);
}

TEST(HttpClassifier, WireShapeAndMalformedReplies) {
  struct Capture : Transport {
    std::string reply;
    std::string last_body;
    HttpReply post(const std::string&, const HeaderList&, const std::string&,
                   const std::string& body, std::chrono::milliseconds) override {
      last_body = body;
      return {200, reply, false};
    }
  };
  auto t = std::make_shared<Capture>();
  SafetyConfig cfg;
  cfg.classifier_url = "http://classifier.local/classify";
  HttpClassifier cls(t, cfg);
  t->reply = R"({"score": 0.25})";
  EXPECT_DOUBLE_EQ(cls.score("abc", "top bottom"), 0.25);
  auto sent = nlohmann::json::parse(t->last_body);
  EXPECT_EQ(sent["image_b64"], base64_encode("abc"));
  EXPECT_EQ(sent["text"], "top bottom");

  for (const char* bad : {"nope", R"({"score":"high"})", R"({"score": 1.5})", R"({})"}) {
    t->reply = bad;
    try {
      cls.score("abc", "x");
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::ProtocolError) << bad;
    }
    auto closed = score_meme("abc", kCaptions, cfg, cls);
    EXPECT_TRUE(closed.flagged);
  }
}

}  // namespace
}  // namespace memeforge
