// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "memeforge/error.hpp"
#include "memeforge/eval.hpp"
#include "report_oracle.hpp"
#include "test_support.hpp"

namespace memeforge {
namespace {

using testing::TempDir;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::IoError;
}

std::vector<Evaluator> evaluators(int n) {
  std::vector<Evaluator> out;
  for (int i = 0; i < n; ++i) out.push_back({"e" + std::to_string(i), "Evaluator " + std::to_string(i), ""});
  return out;
}

std::vector<std::string> memes(int n, const std::string& prefix = "m") {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::map<std::string, int> loads(const std::vector<Assignment>& as) {
  std::map<std::string, int> out;
  for (const auto& a : as) {
    for (const auto& e : a.evaluator_ids) ++out[e];
  }
  return out;
}

Rating rating(const std::string& meme, const std::string& ev, bool auth = false,
              Conveyance conv = Conveyance::NA, bool hateful = false, int hil = 3, int per = 3) {
  Rating r;
  r.meme_id = meme;
  r.evaluator_id = ev;
  r.authenticity = auth;
  r.conveyance = conv;
  r.hateful = hateful;
  r.hilarity = hil;
  r.persuasiveness = per;
  return r;
}

// ---------------------------------------------------------------------------
// Assignment

TEST(Assignments, TwelveByTwelve) {
  auto as = make_assignments(memes(12), evaluators(12), 2, 1);
  auto l = loads(as);
  ASSERT_EQ(l.size(), 12u);
  for (const auto& [_, n] : l) EXPECT_EQ(n, 2);
}

// All balanced ways to give 5 memes 2 of 3 evaluators, enumerated.
TEST(Assignments, FiveMemesThreeEvaluatorsMatchesEnumeration) {
  const std::vector<std::pair<int, int>> pairs = {{0, 1}, {0, 2}, {1, 2}};
  std::set<std::vector<int>> balanced_load_shapes;
  for (int code = 0; code < 243; ++code) {
    std::vector<int> load(3, 0);
    int c = code;
    for (int m = 0; m < 5; ++m, c /= 3) {
      ++load[pairs[c % 3].first];
      ++load[pairs[c % 3].second];
    }
    if (*std::max_element(load.begin(), load.end()) - *std::min_element(load.begin(), load.end()) <= 1) {
      std::sort(load.begin(), load.end());
      balanced_load_shapes.insert(load);
    }
  }
  ASSERT_EQ(balanced_load_shapes, (std::set<std::vector<int>>{{3, 3, 4}}));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<int> got;
    for (const auto& [_, n] : loads(make_assignments(memes(5), evaluators(3), 2, seed))) got.push_back(n);
    std::sort(got.begin(), got.end());
    EXPECT_TRUE(balanced_load_shapes.contains(got));
  }
}

TEST(Assignments, TooFewEvaluators) {
  EXPECT_EQ(code_of([] { make_assignments(memes(3), evaluators(1), 2); }), Errc::TooFewEvaluators);
  EXPECT_EQ(code_of([] { make_assignments(memes(3), evaluators(3), 1); }), Errc::TooFewEvaluators);
  EXPECT_EQ(code_of([] { make_assignments(memes(3), evaluators(3), 4); }), Errc::TooFewEvaluators);
  auto dup = evaluators(3);
  dup[2].evaluator_id = "e0";
  EXPECT_EQ(code_of([&] { make_assignments(memes(3), dup, 2); }), Errc::SchemaError);
}

TEST(Assignments, InvariantsOverRandomInstances) {
  std::mt19937_64 gen(100);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_memes = 1 + static_cast<int>(gen() % 80);
    const int n_eval = 2 + static_cast<int>(gen() % 14);
    const int k = 2 + static_cast<int>(gen() % (n_eval - 1));
    const std::uint64_t seed = gen();
    const auto ids = memes(n_memes);
    auto as = make_assignments(ids, evaluators(n_eval), k, seed);
    ASSERT_EQ(as.size(), ids.size());
    std::map<std::string, int> load;
    for (int e = 0; e < n_eval; ++e) load["e" + std::to_string(e)] = 0;
    for (std::size_t i = 0; i < as.size(); ++i) {
      ASSERT_EQ(as[i].meme_id, ids[i]);
      ASSERT_EQ(static_cast<int>(as[i].evaluator_ids.size()), k);
      std::set<std::string> distinct(as[i].evaluator_ids.begin(), as[i].evaluator_ids.end());
      ASSERT_EQ(distinct.size(), as[i].evaluator_ids.size());
      for (const auto& e : as[i].evaluator_ids) ++load.at(e);
    }
    int lo = INT32_MAX, hi = 0;
    for (const auto& [_, n] : load) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    ASSERT_LE(hi - lo, 1) << "trial " << trial;
    auto again = make_assignments(ids, evaluators(n_eval), k, seed);
    for (std::size_t i = 0; i < as.size(); ++i) ASSERT_EQ(again[i].evaluator_ids, as[i].evaluator_ids);
  }
}

TEST(Assignments, JsonRoundTrip) {
  auto as = make_assignments(memes(4), evaluators(3), 2, 3);
  for (const auto& a : as) {
    auto back = assignment_from_json(to_json(a));
    EXPECT_EQ(back.evaluator_ids, a.evaluator_ids);
    EXPECT_EQ(back.meme_id, a.meme_id);
  }
  EXPECT_EQ(code_of([] { assignment_from_json({{"meme_id", "m"}, {"evaluator_ids", {"a", "a"}}}); }),
            Errc::SchemaError);
}

// ---------------------------------------------------------------------------
// Metrics

// n memes, both raters agree "yes" on the first `yes` of them.
std::vector<Rating> both_agree(int n, int yes, const std::function<void(Rating&, bool)>& set) {
  std::vector<Rating> out;
  for (int i = 0; i < n; ++i) {
    for (const char* ev : {"a", "b"}) {
      Rating r = rating("m" + std::to_string(i), ev);
      set(r, i < yes);
      out.push_back(r);
    }
  }
  return out;
}

TEST(Metrics, AuthenticityFixtures) {
  auto auth = [](Rating& r, bool y) { r.authenticity = y; };
  EXPECT_EQ(authenticity_score(both_agree(100, 48, auth)), 0.48);
  EXPECT_EQ(authenticity_score(both_agree(100, 53, auth)), 0.53);
  EXPECT_EQ(authenticity_score(both_agree(100, 59, auth)), 0.59);
  EXPECT_EQ(authenticity_score(both_agree(100, 23, auth)), 0.23);
  EXPECT_EQ(authenticity_score(both_agree(10, 10, auth)), 1.0);
  EXPECT_EQ(authenticity_score({rating("m", "a", true), rating("m", "b", false)}), 0.5);
  EXPECT_EQ(code_of([] { authenticity_score({}); }), Errc::NoRatings);
}

TEST(Metrics, ConveyanceFixtures) {
  auto support = [](Rating& r, bool y) { r.conveyance = y ? Conveyance::Support : Conveyance::NA; };
  EXPECT_EQ(conveyance_score(both_agree(100, 71, support), Stance::Support), 0.71);
  auto all_na = both_agree(10, 0, support);
  EXPECT_EQ(conveyance_score(all_na, Stance::Support), 0.0);
  EXPECT_EQ(conveyance_score(all_na, Stance::Deny), 0.0);
  std::vector<Rating> split = {rating("m", "a", false, Conveyance::Support),
                               rating("m", "b", false, Conveyance::Deny)};
  EXPECT_EQ(conveyance_score(split, Stance::Support), 0.5);
  EXPECT_EQ(conveyance_score(split, Stance::Deny), 0.5);
}

TEST(Metrics, HumanHatefulnessFixtures) {
  auto hate = [](Rating& r, bool y) { r.hateful = y; };
  EXPECT_EQ(human_hatefulness(both_agree(100, 1, hate)), 0.01);
  EXPECT_EQ(human_hatefulness(both_agree(100, 0, hate)), 0.0);
  auto split = both_agree(100, 0, hate);
  split[0].hateful = true;  // one meme split between its two raters
  EXPECT_EQ(human_hatefulness(split), 0.005);
}

TEST(Metrics, Distributions) {
  auto d = distribution_of({4, 4, 4, 5});
  EXPECT_EQ(d.median, 4);
  EXPECT_EQ(d.histogram, (std::array<int, 5>{0, 0, 0, 3, 1}));
  auto ones = distribution_of(std::vector<int>(20, 1));
  EXPECT_EQ(ones.median, 1);
  EXPECT_EQ(ones.histogram[0], 20);
  EXPECT_EQ(distribution_of({1, 5}).median, 1);
  EXPECT_EQ(distribution_of({5, 1, 3}).median, 3);
  EXPECT_EQ(code_of([] { distribution_of({}); }), Errc::NoRatings);
  EXPECT_EQ(code_of([] { distribution_of({0}); }), Errc::RangeError);
}

// ---------------------------------------------------------------------------
// Report

std::vector<MemeInfo> chatgpt_climate(int n, const std::string& prefix = "c") {
  std::vector<MemeInfo> out;
  for (int i = 0; i < n; ++i) {
    MemeInfo m;
    m.meme_id = prefix + std::to_string(i);
    m.source = "ChatGPT";
    m.cause_id = "climate_action";
    m.stance = Stance::Support;
    m.technique = Technique::Causes;
    m.backend = BackendKind::ChatGptLike;
    m.status = MemeStatus::Kept;
    out.push_back(m);
  }
  return out;
}

TEST(Report, AuthenticityRowForClimateChatGpt) {
  auto infos = chatgpt_climate(100);
  std::vector<Rating> rs;
  for (int i = 0; i < 100; ++i) {
    for (const char* ev : {"a", "b"}) {
      rs.push_back(rating("c" + std::to_string(i), ev, i < 48, i < 71 ? Conveyance::Support : Conveyance::Deny));
    }
  }
  auto report = build_report(rs, infos);
  ASSERT_EQ(report.groups.size(), 1u);
  EXPECT_EQ(report.groups[0].authenticity, 0.48);
  ASSERT_EQ(report.cells.size(), 1u);
  EXPECT_EQ(report.cells[0].conveyance_support, 0.71);
  const auto text = render_report_text(report);
  EXPECT_NE(text.find("\nChatGPT, Climate Action, 0.48\n"), std::string::npos) << text;
}

TEST(Report, BaselinesAndGenderRows) {
  std::vector<MemeInfo> infos;
  std::vector<Rating> rs;
  auto add = [&](const std::string& source, std::optional<std::string> cause, int yes) {
    for (int i = 0; i < 100; ++i) {
      MemeInfo m;
      m.meme_id = source + "-" + std::to_string(i);
      m.source = source;
      m.cause_id = cause;
      infos.push_back(m);
      for (const char* ev : {"a", "b"}) rs.push_back(rating(m.meme_id, ev, i < yes));
    }
  };
  add("Online Random", std::nullopt, 59);
  add("Dank Learning", std::nullopt, 23);
  add("ChatGPT", "gender_equality", 53);
  auto text = render_report_text(build_report(rs, infos));
  EXPECT_NE(text.find("Online Random, All, 0.59\n"), std::string::npos) << text;
  EXPECT_NE(text.find("Dank Learning, All, 0.23\n"), std::string::npos) << text;
  EXPECT_NE(text.find("ChatGPT, Gender Equality, 0.53\n"), std::string::npos) << text;
}

TEST(Report, UnratedCellHasZeroCountAndNullScores) {
  auto infos = chatgpt_climate(3);
  MemeInfo other = infos[0];
  other.meme_id = "deny-1";
  other.stance = Stance::Deny;
  other.technique = Technique::Benefits;
  other.status = MemeStatus::RejectedHateful;
  infos.push_back(other);
  auto report = build_report({rating("c0", "a", true)}, infos);
  ASSERT_EQ(report.cells.size(), 2u);
  const auto& empty = *std::find_if(report.cells.begin(), report.cells.end(),
                                    [](const CellMetrics& c) { return c.stance == Stance::Deny; });
  EXPECT_EQ(empty.rated_memes, 0);
  EXPECT_EQ(empty.generated, 1);
  EXPECT_FALSE(empty.authenticity);
  EXPECT_FALSE(empty.conveyance_support);
  EXPECT_FALSE(empty.human_hatefulness);
  EXPECT_EQ(empty.machine_hatefulness, 1.0);
  EXPECT_TRUE(to_json(empty)["authenticity"].is_null());
  EXPECT_NE(render_report_text(report).find("Deny, Benefits, n/a, n/a, 0"), std::string::npos);
}

TEST(Report, UnknownMemeIsJoinError) {
  EXPECT_EQ(code_of([] { build_report({rating("ghost", "a")}, chatgpt_climate(2)); }), Errc::JoinError);
}

TEST(Report, MatchesBruteForceOracleOnRandomStores) {
  std::mt19937_64 gen(50);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MemeInfo> infos;
    std::vector<Rating> rs;
    testing::random_store(gen, infos, rs);
    auto report = build_report(rs, infos);
    SCOPED_TRACE(trial);
    auto cells = testing::oracle_mismatch(report.cells, rs, infos, false);
    ASSERT_FALSE(cells) << *cells;
    auto groups = testing::oracle_mismatch(report.groups, rs, infos, true);
    ASSERT_FALSE(groups) << *groups;
    for (const auto& c : report.cells) {
      for (const auto& v : {c.authenticity, c.conveyance_support, c.conveyance_deny, c.human_hatefulness}) {
        if (v) ASSERT_TRUE(*v >= 0.0 && *v <= 1.0);
      }
    }

    // Totals: rated memes across cells equal distinct rated ids.
    std::set<std::string> rated;
    for (const auto& r : rs) rated.insert(r.meme_id);
    int sum = 0;
    for (const auto& c : report.cells) sum += c.rated_memes;
    ASSERT_EQ(sum, static_cast<int>(rated.size()));

    // Insertion order never matters.
    auto shuffled = rs;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    auto infos_shuffled = infos;
    std::shuffle(infos_shuffled.begin(), infos_shuffled.end(), gen);
    auto again = build_report(shuffled, infos_shuffled);
    ASSERT_EQ(again.cells.size(), report.cells.size());
    for (std::size_t i = 0; i < again.cells.size(); ++i) {
      ASSERT_EQ(to_json(again.cells[i]), to_json(report.cells[i]));
    }
  }
}

TEST(Report, FromManifestUsesDisplayNames) {
  MemeArtifact a;
  a.meme_id = "mf-1";
  a.cell.cause_id = "climate_action";
  a.cell.backend_id = BackendKind::ChatGptLike;
  a.status = MemeStatus::Kept;
  auto infos = meme_info_from_manifest({a}, {{BackendKind::ChatGptLike, "ChatGPT"}});
  ASSERT_EQ(infos.size(), 1u);
  EXPECT_EQ(infos[0].source, "ChatGPT");
  EXPECT_EQ(infos[0].status, MemeStatus::Kept);
}

TEST(Report, WriteReportFiles) {
  TempDir dir;
  auto infos = chatgpt_climate(4);
  std::vector<Rating> rs = {rating("c0", "a", true), rating("c1", "b", false, Conveyance::Support)};
  write_report(build_report(rs, infos), dir / "report");
  for (const char* f : {"authenticity.csv", "conveyance.csv", "hatefulness.csv", "distributions.csv",
                        "cells.csv", "summary.txt"}) {
    EXPECT_TRUE(std::filesystem::is_regular_file(dir / "report" / f)) << f;
  }
  EXPECT_NE(read_file(dir / "report" / "authenticity.csv").find("ChatGPT,Climate Action,2,2,0.5"),
            std::string::npos);
}

TEST(Baselines, LoadFile) {
  TempDir dir;
  testing::write_text(dir / "b.json", R"([{"meme_id":"r1","source":"Online Random"},
                                         {"meme_id":"d1","source":"Dank Learning","cause_id":"climate_action"}])");
  auto b = load_baselines(dir / "b.json");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_FALSE(b[0].cause_id);
  EXPECT_EQ(b[1].cause_id, "climate_action");
  testing::write_text(dir / "bad.json", R"({"meme_id":"x"})");
  EXPECT_EQ(code_of([&] { load_baselines(dir / "bad.json"); }), Errc::SchemaError);
}

// ---------------------------------------------------------------------------
// Ratings

TEST(RatingJson, StrictTypes) {
  auto r = rating("m", "e", true, Conveyance::Deny, false, 5, 1);
  EXPECT_TRUE(rating_from_json(to_json(r)).same_judgment(r));
  auto j = to_json(r);
  j["hilarity"] = 6;
  EXPECT_EQ(code_of([&] { validate(rating_from_json(j)); }), Errc::RangeError);
  j = to_json(r);
  j["hilarity"] = "5";
  EXPECT_EQ(code_of([&] { rating_from_json(j); }), Errc::RangeError);
  j = to_json(r);
  j["authenticity"] = 1;
  EXPECT_EQ(code_of([&] { rating_from_json(j); }), Errc::RangeError);
  j = to_json(r);
  j["conveyance"] = "maybe";
  EXPECT_EQ(code_of([&] { rating_from_json(j); }), Errc::RangeError);
  j = to_json(r);
  j.erase("persuasiveness");
  EXPECT_EQ(code_of([&] { rating_from_json(j); }), Errc::RangeError);
}

TEST(RatingsStore, LatestWinsAndDuplicatesAreNoOps) {
  TempDir dir;
  RatingsStore store(dir / "ratings.jsonl");
  EXPECT_TRUE(store.submit(rating("m", "e", true)));
  EXPECT_FALSE(store.submit(rating("m", "e", true)));
  EXPECT_TRUE(store.submit(rating("m", "e", false)));
  EXPECT_EQ(store.record_count(), 2u);
  auto latest = store.latest();
  ASSERT_EQ(latest.size(), 1u);
  EXPECT_FALSE(latest[0].authenticity);
  EXPECT_FALSE(latest[0].submitted_at.empty());
  EXPECT_EQ(code_of([&] { store.submit(rating("m", "e", true, Conveyance::NA, false, 0)); }),
            Errc::RangeError);
  EXPECT_EQ(store.record_count(), 2u);
}

TEST(RatingsStore, ReplayAfterTornWrite) {
  TempDir dir;
  {
    RatingsStore store(dir / "ratings.jsonl");
    for (int i = 0; i < 10; ++i) store.submit(rating("m" + std::to_string(i), "e", i % 2));
  }
  {
    std::ofstream out(dir / "ratings.jsonl", std::ios::app);
    out << R"({"meme_id":"m99","evaluator_id":"e","authent)";
  }
  RatingsStore replayed(dir / "ratings.jsonl");
  EXPECT_EQ(replayed.latest().size(), 10u);
  EXPECT_TRUE(replayed.submit(rating("m10", "e")));
  RatingsStore again(dir / "ratings.jsonl");
  EXPECT_EQ(again.latest().size(), 11u);
}

}  // namespace
}  // namespace memeforge
