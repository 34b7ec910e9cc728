// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, each checked against
// its runtime budget. Exits nonzero if anything fails.

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "layout_oracle.hpp"
#include "memeforge/captions.hpp"
#include "memeforge/compositor.hpp"
#include "memeforge/error.hpp"
#include "memeforge/eval.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/prompts.hpp"
#include "memeforge/review.hpp"
#include "memeforge/safety.hpp"
#include "memeforge/text.hpp"
#include "report_oracle.hpp"
#include "stub_run.hpp"

namespace memeforge::acceptance {
namespace {

using nlohmann::json;
using testing::TempDir;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

// ---------------------------------------------------------------------------

MemeTemplate skeleton() {
  MemeTemplate t;
  t.template_id = "4087833";
  t.name = "Waiting Skeleton";
  t.image_ref = "images/waiting_skeleton.png";
  t.width_px = 298;
  t.height_px = 403;
  return t;
}

std::string golden_name(const CampaignCell& c, const char* kind) {
  return c.cause_id + "." + text::to_lower_ascii(to_string(c.stance)) + "." +
         text::to_lower_ascii(to_string(c.technique)) + "." + kind + ".txt";
}

void prompt_goldens() {
  const auto& tx = Taxonomy::builtin();
  const auto pool = DemoPool::load(testing::demo_pool_path());
  const auto dir = testing::testdata_dir() / "prompts";
  int checked = 0;
  for (const auto& cell : tx.all_cells()) {
    auto few = build_fewshot_prompt(tx, cell, skeleton(), testing::kGoldenDescription,
                                    pool.demos(cell.cause_id, cell.stance));
    auto zero = build_zeroshot_prompt(tx, cell, skeleton(), testing::kGoldenDescription);
    require(few.rendered_text == read_file(dir / golden_name(cell, "fewshot")),
            "few-shot golden mismatch: " + golden_name(cell, "fewshot"));
    require(zero.rendered_text == read_file(dir / golden_name(cell, "zeroshot")),
            "zero-shot golden mismatch: " + golden_name(cell, "zeroshot"));
    checked += 2;
  }
  require(checked == 20, fmt::format("{} goldens checked, expected 20", checked));
  const auto s = build_instruction(tx, {"climate_action", Stance::Support, Technique::Causes});
  require(s.find("highlights the Causes of Climate Change to Support it.") != std::string::npos,
          "instruction text: " + s);
}

void applicability_and_plan() {
  using T = Technique;
  const auto& tx = Taxonomy::builtin();
  const std::set<T> support{T::Causes, T::Consequences, T::Solutions};
  require(tx.applicable_techniques("climate_action", Stance::Support) == support &&
              tx.applicable_techniques("gender_equality", Stance::Support) == support,
          "support techniques");
  require(tx.applicable_techniques("climate_action", Stance::Deny) == std::set<T>{T::EvidenceOfAbsence, T::Benefits},
          "climate deny techniques");
  require(tx.applicable_techniques("gender_equality", Stance::Deny) ==
              std::set<T>{T::EvidenceOfAbsence, T::Rationale},
          "gender deny techniques");

  const auto plan = plan_full_campaign({"chatgpt-like", "llama-like", "llava-like"}, 100);
  require(plan.total == 3000, fmt::format("plan total {}", plan.total));
  std::map<std::pair<BackendKind, std::string>, int> sub;
  int sum = 0;
  for (const auto& c : plan.cells) {
    sub[{c.backend_id, c.cause_id}] += c.count;
    sum += c.count;
  }
  require(sum == 3000, "cell counts do not add up");
  require(sub.size() == 6, "expected 3 models x 2 causes");
  for (const auto& [k, n] : sub) require(n == 500, fmt::format("subtotal {} for {}", n, k.second));
}

// ---------------------------------------------------------------------------

void check_parse_result(const ParseResult& r) {
  require(r.captions.has_value() == (r.outcome != ParseOutcome::Failed), "outcome/captions disagree");
  if (!r.captions) return;
  auto ok = [](const std::string& s) {
    return !text::trim(s).empty() && s.find_first_of("\r\n") == std::string::npos &&
           text::utf8_length(s) <= kMaxCaptionChars;
  };
  require(ok(r.captions->top), "invalid top caption");
  require(!r.captions->bottom || ok(*r.captions->bottom), "invalid bottom caption");
}

std::string random_caption(std::mt19937_64& gen) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  static const std::vector<std::string> inner = {" ", " ", ",", "?", "!", "'", "-", ":", "\xC3\xA9", "."};
  std::string s(1, alphabet[gen() % alphabet.size()]);
  const int len = 1 + static_cast<int>(gen() % 60);
  for (int i = 0; i < len; ++i) {
    const auto pick = gen() % 10;
    if (pick < 6) s += alphabet[gen() % alphabet.size()];
    else if (pick < 9) s += inner[gen() % inner.size()];
    else s += "\"Q\"";
  }
  s += alphabet[gen() % alphabet.size()];
  return text::collapse_whitespace(s);
}

void parser_suite() {
  const std::string wonka =
      "[Let's think step-by-step.] The \"willywonka\" image is frequently employed sarcastically, "
      "often with rhetorical questions. Let's use it for... Caption at top: \"You think global "
      "warming is fake?\" and Caption at bottom: \"Please tell me how you get the \"FACTS\" from "
      "politicians and oil companies\"";
  auto w = parse_captions(wonka);
  require(w.outcome == ParseOutcome::Parsed, "willywonka demo did not parse cleanly");
  require(w.captions->top == "You think global warming is fake?", "willywonka top: " + w.captions->top);
  require(w.captions->bottom ==
              std::optional<std::string>("Please tell me how you get the \"FACTS\" from politicians and oil companies"),
          "willywonka bottom: " + w.captions->bottom.value_or("<none>"));

  const std::string skeleton_demo =
      "The \"Waiting Skeleton\" image is often used to depict patience or waiting with a touch of "
      "irony. Let's use this image for... Caption at top: \"Waiting for the forests to magically "
      "grow back\"";
  auto s = parse_captions(skeleton_demo);
  require(s.outcome == ParseOutcome::Parsed, "skeleton demo did not parse cleanly");
  require(s.captions->top == "Waiting for the forests to magically grow back", "skeleton top: " + s.captions->top);
  require(!s.captions->bottom, "skeleton demo has no bottom caption");

  std::mt19937_64 gen(20260101);
  const std::vector<std::string> pieces = {"Caption at top:", "caption at bottom:", "\"", "\xE2\x80\x9C",
                                           "\xE2\x80\x9D", " ", "\n", ".", "*", "`", "words", "\xFF", "\xC3"};
  for (int i = 0; i < 10000; ++i) {
    std::string raw;
    const int len = static_cast<int>(gen() % 40);
    for (int k = 0; k < len; ++k) {
      if (gen() % 3 == 0) raw += static_cast<char>(gen() % 256);
      else raw += pieces[gen() % pieces.size()];
    }
    ParseResult r;
    try {
      r = parse_captions(raw);
    } catch (const std::exception& e) {
      throw Failure(fmt::format("fuzz input {} threw: {}", i, e.what()));
    }
    check_parse_result(r);
  }

  for (int i = 0; i < 1000; ++i) {
    CaptionPair c;
    c.top = random_caption(gen);
    if (gen() % 2) c.bottom = random_caption(gen);
    if (gen() % 2) c.rationale_text = random_caption(gen) + "...";
    const auto rendered = render_marker_form(c);
    auto r = parse_captions(rendered);
    require(r.outcome == ParseOutcome::Parsed && r.captions && *r.captions == c, "round trip failed: " + rendered);
  }
}

// ---------------------------------------------------------------------------

class FixedClassifier final : public Classifier {
 public:
  explicit FixedClassifier(double s) : s_(s) {}
  double score(const std::string&, const std::string&) override { return s_; }
  std::string id() const override { return "fixed"; }

 private:
  double s_;
};

void safety_gate() {
  const CaptionPair caps{"Waiting for the forests", std::nullopt, std::nullopt};
  SafetyConfig cfg;
  FixedClassifier at(0.90), below(0.89999);
  require(score_meme("img", caps, cfg, at).flagged, "score 0.90 must be flagged at threshold 0.90");
  require(!score_meme("img", caps, cfg, below).flagged, "score 0.89999 must pass");

  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> scores(1000);
  for (auto& x : scores) x = u(gen);
  scores[0] = 0.9;
  std::vector<bool> prev_kept(scores.size(), false);
  for (int step = 0; step <= 100; ++step) {
    SafetyConfig c;
    c.threshold = step / 100.0;
    std::vector<std::pair<std::size_t, SafetyVerdict>> recs;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      FixedClassifier f(scores[i]);
      recs.push_back({i, score_meme("img", caps, c, f)});
    }
    auto [kept, rejected] = filter_batch(recs);
    require(kept.size() + rejected.size() == scores.size(), "partition lost memes");
    std::vector<bool> is_kept(scores.size(), false);
    for (auto i : kept) is_kept[i] = true;
    for (auto i : rejected) require(!is_kept[i], "meme both kept and rejected");
    for (std::size_t i = 0; i < scores.size(); ++i) {
      require(is_kept[i] == (scores[i] < c.threshold), "partition disagrees with score >= threshold");
      require(!prev_kept[i] || is_kept[i], "raising the threshold rejected a kept meme");
    }
    prev_kept = is_kept;
  }

  auto synth = [](int flagged, int total) {
    std::vector<double> schedule(flagged, 0.95);
    schedule.resize(total, 0.1);
    ScheduledClassifier cls(schedule);
    SafetyConfig c;
    std::vector<SafetyVerdict> vs;
    for (int i = 0; i < total; ++i) vs.push_back(score_meme("img", {"x", std::nullopt, std::nullopt}, c, cls));
    return machine_hatefulness_rate(vs);
  };
  const double climate = synth(6, 100), gender = synth(275, 500);
  require(climate == 0.06, fmt::format("climate rate {}", climate));
  require(gender == 0.55, fmt::format("gender rate {}", gender));
}

// ---------------------------------------------------------------------------

void end_to_end() {
  const auto plan = testing::stub_plan(6);
  require(plan.total == 60, "plan of 60 memes");
  TempDir a, b, c;

  testing::StubRun h1;
  auto r1 = h1.run(plan, a.path(), "accept", 11);
  require(r1.completed && r1.records.size() == 60, fmt::format("{} records", r1.records.size()));
  auto stats = run_stats(r1.records);
  require(stats.global.kept + stats.global.rejected_hateful + stats.global.failed_parse == 60,
          "kept + rejected + failed != planned");
  std::set<std::string> ids;
  for (const auto& rec : r1.records) {
    require(ids.insert(rec.meme_id).second, "duplicate meme id " + rec.meme_id);
    require((rec.status == MemeStatus::Kept) == rec.image_path.has_value(), "image presence vs status");
    if (rec.image_path) require(std::filesystem::is_regular_file(a.path() / *rec.image_path), "missing image");
  }
  require(read_jsonl(manifest_path(a / "accept")).size() == 60, "manifest line count");

  testing::StubRun h2;
  h2.run(plan, b.path(), "accept", 11);
  auto m1 = read_jsonl(manifest_path(a / "accept"));
  auto m2 = read_jsonl(manifest_path(b / "accept"));
  require(m1.size() == m2.size(), "rerun manifest size");
  for (std::size_t i = 0; i < m1.size(); ++i) {
    require(without_timestamps(m1[i]) == without_timestamps(m2[i]), "rerun differs at line " + std::to_string(i));
  }
  for (const auto& rec : r1.records) {
    if (rec.image_path) {
      require(read_file(a.path() / *rec.image_path) == read_file(b.path() / *rec.image_path), "rerun PNG differs");
    }
  }

  {
    testing::StubRun partial;
    auto p = partial.run(plan, c.path(), "accept", 11, 25);
    require(!p.completed && p.newly_processed == 25, "interrupted run");
  }
  {
    std::ofstream out(manifest_path(c / "accept"), std::ios::app);
    out << R"({"meme_id":"mf-torn","cell":{"cau)";
  }
  testing::StubRun resumed;
  auto r3 = resumed.run(plan, c.path(), "accept", 11);
  require(r3.completed && r3.skipped_existing == 25 && r3.newly_processed == 35, "resume counts");
  std::set<std::string> resumed_ids;
  for (const auto& j : read_jsonl(manifest_path(c / "accept"))) {
    require(resumed_ids.insert(j["meme_id"].get<std::string>()).second, "duplicate after resume");
  }
  require(resumed_ids == ids, "resumed run has a different meme set");
}

// ---------------------------------------------------------------------------

void compositor() {
  const auto font = Font::load(testing::font_path());
  RenderStyle style;
  style.font_ref = testing::font_path().string();
  const auto bytes = read_file(testing::skeleton_image());

  const auto golden = std::string(text::trim(read_file(testing::testdata_dir() / "compositor" / "skeleton_test.sha256")));
  auto m = render_meme(bytes, CaptionPair{"TEST", std::nullopt, std::nullopt}, style, *font);
  require(m.digest == golden, "golden digest mismatch: " + m.digest);

  auto src = decode_image(bytes);
  auto out = decode_image(m.png_bytes);
  const auto band = bottom_band(src.width, src.height, style);
  const std::size_t row = static_cast<std::size_t>(src.width) * 4;
  for (int y = band.y; y < src.height; ++y) {
    require(std::equal(src.pixels.begin() + y * row, src.pixels.begin() + (y + 1) * row, out.pixels.begin() + y * row),
            fmt::format("bottom band row {} changed", y));
  }

  testing::MetricsOracle oracle;
  std::mt19937_64 gen(200);
  for (int i = 0; i < 200; ++i) {
    const auto caption = testing::random_words(gen, 1 + static_cast<int>(gen() % 30));
    const int w = 40 + static_cast<int>(gen() % 600);
    const int h = 20 + static_cast<int>(gen() % 300);
    auto r = layout_caption(caption, w, h, style, *font, 4 * h);
    for (const auto& line : r.lines) {
      require(oracle.width(line, r.font_px) <= w + 1e-9, fmt::format("line '{}' overflows {} px", line, w));
    }
    if (!r.truncated) {
      require(static_cast<int>(r.lines.size()) * oracle.line_height(r.font_px) <= h, "lines overflow box height");
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<MemeInfo> fixture_memes(const std::string& source, std::optional<std::string> cause, int n) {
  std::vector<MemeInfo> out;
  for (int i = 0; i < n; ++i) {
    MemeInfo m;
    m.meme_id = fmt::format("{}-{}-{}", source, cause.value_or("all"), i);
    m.source = source;
    m.cause_id = cause;
    if (cause) {
      m.stance = Stance::Support;
      m.technique = Technique::Causes;
      m.status = MemeStatus::Kept;
    }
    out.push_back(m);
  }
  return out;
}

void metrics() {
  std::mt19937_64 gen(50);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MemeInfo> infos;
    std::vector<Rating> rs;
    testing::random_store(gen, infos, rs);
    auto report = build_report(rs, infos);
    if (auto bad = testing::oracle_mismatch(report.cells, rs, infos, false)) {
      throw Failure(fmt::format("store {}: {}", trial, *bad));
    }
    if (auto bad = testing::oracle_mismatch(report.groups, rs, infos, true)) {
      throw Failure(fmt::format("store {} groups: {}", trial, *bad));
    }
  }

  // Both raters agree on every meme; `yes` of 100 memes are positive.
  std::vector<MemeInfo> infos;
  std::vector<Rating> rs;
  auto add = [&](const std::string& source, std::optional<std::string> cause, int yes, int support) {
    auto ms = fixture_memes(source, cause, 100);
    for (int i = 0; i < 100; ++i) {
      for (const char* ev : {"a", "b"}) {
        Rating r;
        r.meme_id = ms[i].meme_id;
        r.evaluator_id = ev;
        r.authenticity = i < yes;
        r.conveyance = i < support ? Conveyance::Support : Conveyance::NA;
        rs.push_back(r);
      }
    }
    infos.insert(infos.end(), ms.begin(), ms.end());
  };
  add("ChatGPT", "climate_action", 48, 71);
  add("ChatGPT", "gender_equality", 53, 0);
  add("Online Random", std::nullopt, 59, 0);
  add("Dank Learning", std::nullopt, 23, 0);
  auto report = build_report(rs, infos);
  const std::map<std::string, double> want = {{"ChatGPT|climate_action", 0.48},
                                              {"ChatGPT|gender_equality", 0.53},
                                              {"Online Random|", 0.59},
                                              {"Dank Learning|", 0.23}};
  for (const auto& g : report.groups) {
    const auto key = g.source + "|" + g.cause_id.value_or("");
    require(g.authenticity == want.at(key), fmt::format("{} authenticity {}", key, g.authenticity.value_or(-1)));
  }
  bool saw_conveyance = false;
  for (const auto& c : report.cells) {
    if (c.source == "ChatGPT" && c.cause_id == "climate_action") {
      require(c.conveyance_support == 0.71, fmt::format("conveyance {}", c.conveyance_support.value_or(-1)));
      saw_conveyance = true;
    }
  }
  require(saw_conveyance, "no climate ChatGPT cell");

  for (int trial = 0; trial < 100; ++trial) {
    const int n_memes = 1 + static_cast<int>(gen() % 80);
    const int n_eval = 2 + static_cast<int>(gen() % 14);
    const int k = 2 + static_cast<int>(gen() % (n_eval - 1));
    const auto seed = gen();
    std::vector<std::string> ids;
    for (int i = 0; i < n_memes; ++i) ids.push_back("m" + std::to_string(i));
    std::vector<Evaluator> evs;
    for (int e = 0; e < n_eval; ++e) evs.push_back({"e" + std::to_string(e), "", ""});
    auto as = make_assignments(ids, evs, k, seed);
    std::map<std::string, int> load;
    for (const auto& e : evs) load[e.evaluator_id] = 0;
    for (const auto& a : as) {
      require(static_cast<int>(a.evaluator_ids.size()) == k, "k-coverage");
      require(std::set<std::string>(a.evaluator_ids.begin(), a.evaluator_ids.end()).size() == a.evaluator_ids.size(),
              "distinct evaluators");
      for (const auto& e : a.evaluator_ids) ++load.at(e);
    }
    require(as.size() == ids.size(), "every meme assigned");
    int lo = INT32_MAX, hi = 0;
    for (const auto& [_, n] : load) {
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    require(hi - lo <= 1, fmt::format("instance {} imbalance {}", trial, hi - lo));
    auto again = make_assignments(ids, evs, k, seed);
    for (std::size_t i = 0; i < as.size(); ++i) require(again[i].evaluator_ids == as[i].evaluator_ids, "determinism");
  }
}

// ---------------------------------------------------------------------------

std::string rating_body(const std::string& meme, int hilarity) {
  return json{{"meme_id", meme},          {"authenticity", true}, {"hilarity", hilarity},
              {"conveyance", "Support"}, {"persuasiveness", 4},  {"hateful", false}}
      .dump();
}

void review() {
  TempDir dir;
  std::vector<std::string> ids;
  {
    testing::StubRun run;
    for (const auto& a : run.run(testing::stub_plan(6), dir.path(), "r1", 3).records) {
      if (a.image_path) ids.push_back(a.meme_id);
    }
  }
  std::vector<Evaluator> evs;
  json tokens = {{"admin_token", "admin"},
                 {"image_dir", "r1"},
                 {"assignments", "assignments.jsonl"},
                 {"ratings", "ratings.jsonl"},
                 {"manifest", manifest_path(dir / "r1").string()},
                 {"evaluators", json::array()}};
  for (int e = 0; e < 4; ++e) {
    evs.push_back({"e" + std::to_string(e), "", ""});
    tokens["evaluators"].push_back({{"evaluator_id", evs.back().evaluator_id}, {"token", "tok" + std::to_string(e)}});
  }
  const auto assignments = make_assignments(ids, evs, 2, 1);
  {
    JsonlAppender out(dir / "assignments.jsonl");
    for (const auto& a : assignments) out.append(to_json(a));
  }
  const auto cfg = review_config_from_json(tokens, dir.path());
  std::vector<std::pair<std::string, std::string>> slots;  // (token, meme)
  for (const auto& a : assignments) {
    for (const auto& e : a.evaluator_ids) slots.push_back({"tok" + e.substr(1), a.meme_id});
  }
  require(slots.size() >= 100, fmt::format("only {} slots", slots.size()));

  // Blindness and idempotency over HTTP.
  {
    ReviewService svc(cfg);
    ReviewServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    httplib::Client client("127.0.0.1", port);
    std::set<std::string> allowed = {"status", "meme_id", "image_url", "cause", "remaining"};
    std::vector<std::string> forbidden = {"stance", "technique", "backend", "safety", "score", "stub", "flagged"};
    for (Technique t : kAllTechniques) forbidden.emplace_back(to_string(t));
    for (int e = 0; e < 4; ++e) {
      auto res = client.Get("/api/task", {{"Authorization", "Bearer tok" + std::to_string(e)}});
      require(res && res->status == 200, "task request failed");
      const auto body = json::parse(res->body);
      for (const auto& [k, _] : body.items()) require(allowed.contains(k), "task payload has field " + k);
      for (const auto& word : forbidden) {
        require(res->body.find(word) == std::string::npos, "task payload mentions " + word + ": " + res->body);
      }
    }
    const auto& [tok, meme] = slots.front();
    const httplib::Headers auth = {{"Authorization", "Bearer " + tok}};
    auto first = client.Post("/api/rating", auth, rating_body(meme, 3), "application/json");
    auto dup = client.Post("/api/rating", auth, rating_body(meme, 3), "application/json");
    require(first && first->status == 200 && json::parse(first->body)["stored"] == true, "first POST");
    require(dup && dup->status == 200 && json::parse(dup->body)["stored"] == false, "duplicate POST stored again");
    require(svc.ratings().size() == 1 && read_jsonl(dir / "ratings.jsonl").size() == 1, "duplicate persisted");
    server.stop();
  }
  std::filesystem::remove(dir / "ratings.jsonl");

  // Crash test: a child process acknowledges 100 ratings, then dies by SIGKILL.
  std::fflush(nullptr);
  const pid_t child = fork();
  if (child == 0) {
    ReviewService svc(cfg);
    for (int i = 0; i < 100; ++i) {
      auto r = svc.submit_rating(slots[i].first, rating_body(slots[i].second, 1 + i % 5));
      if (r.status != 200 || r.body["stored"] != true) _exit(3);
    }
    std::ofstream(dir / "ratings.jsonl", std::ios::app) << R"({"meme_id":"mf-torn","hilar)";
    raise(SIGKILL);
    _exit(4);
  }
  int wstatus = 0;
  waitpid(child, &wstatus, 0);
  require(WIFSIGNALED(wstatus) && WTERMSIG(wstatus) == SIGKILL, "child did not reach the crash point");

  ReviewService restarted(cfg);
  const auto replayed = restarted.ratings();
  require(replayed.size() == 100, fmt::format("{} of 100 ratings survived", replayed.size()));
  std::map<std::pair<std::string, std::string>, int> got;
  for (const auto& r : replayed) got[{r.meme_id, r.evaluator_id}] = r.hilarity;
  for (int i = 0; i < 100; ++i) {
    const std::string ev = "e" + slots[i].first.substr(3);
    auto it = got.find({slots[i].second, ev});
    require(it != got.end() && it->second == 1 + i % 5, fmt::format("rating {} lost or altered", i));
  }
  require(restarted.progress("admin").body["done_slots"] == 100, "progress after restart");
}

struct Criterion {
  const char* name;
  double limit_s;
  std::function<void()> run;
};

}  // namespace
}  // namespace memeforge::acceptance

int main() {
  using namespace memeforge::acceptance;
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {"prompt goldens", 1.0, prompt_goldens},
      {"applicability matrix and campaign plan", 1.0, applicability_and_plan},
      {"caption parser", 30.0, parser_suite},
      {"safety gate", 5.0, safety_gate},
      {"end-to-end stub run", 60.0, end_to_end},
      {"compositor", 30.0, compositor},
      {"metrics oracle", 30.0, metrics},
      {"review service", 30.0, review},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && secs >= c.limit_s) error = fmt::format("over the {:.0f} s budget", c.limit_s);
    if (error.empty()) {
      fmt::print("PASS  {} ({:.3f} s, limit {:.0f} s)\n", c.name, secs, c.limit_s);
    } else {
      ++failed;
      fmt::print("FAIL  {} ({:.3f} s, limit {:.0f} s): {}\n", c.name, secs, c.limit_s, error);
    }
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
