// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include <gtest/gtest.h>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/prompts.hpp"
#include "memeforge/text.hpp"
#include "test_support.hpp"

namespace memeforge {
namespace {

using T = Technique;

MemeTemplate skeleton() {
  MemeTemplate t;
  t.template_id = "4087833";
  t.name = "Waiting Skeleton";
  t.image_ref = "images/waiting_skeleton.png";
  t.width_px = 298;
  t.height_px = 403;
  return t;
}

const DemoPool& pool() {
  static const DemoPool p = DemoPool::load(testing::demo_pool_path());
  return p;
}

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::IoError;
}

std::string golden_name(const CampaignCell& c, const char* kind) {
  return c.cause_id + "." + text::to_lower_ascii(to_string(c.stance)) + "." +
         text::to_lower_ascii(to_string(c.technique)) + "." + kind + ".txt";
}

TEST(Applicability, MatrixForBuiltins) {
  const auto& tx = Taxonomy::builtin();
  const std::set<T> support{T::Causes, T::Consequences, T::Solutions};
  EXPECT_EQ(tx.applicable_techniques("climate_action", Stance::Support), support);
  EXPECT_EQ(tx.applicable_techniques("gender_equality", Stance::Support), support);
  EXPECT_EQ(tx.applicable_techniques("climate_action", Stance::Deny),
            (std::set<T>{T::EvidenceOfAbsence, T::Benefits}));
  EXPECT_EQ(tx.applicable_techniques("gender_equality", Stance::Deny),
            (std::set<T>{T::EvidenceOfAbsence, T::Rationale}));
  EXPECT_EQ(code_of([&] { tx.applicable_techniques("world_peace", Stance::Support); }),
            Errc::UnknownCause);
}

TEST(Applicability, TotalityFiveTechniquesPerCause) {
  const auto& tx = Taxonomy::builtin();
  for (const auto& cause : tx.cause_ids()) {
    std::set<T> all;
    for (auto s : {Stance::Support, Stance::Deny}) {
      auto set = tx.applicable_techniques(cause, s);
      EXPECT_FALSE(set.empty());
      all.insert(set.begin(), set.end());
    }
    EXPECT_EQ(all.size(), 5u) << cause;
  }
  EXPECT_EQ(tx.all_cells().size(), 10u);
}

TEST(Instruction, ClimateSupportCausesVerbatim) {
  const auto s = build_instruction(Taxonomy::builtin(), {"climate_action", Stance::Support, T::Causes});
  EXPECT_EQ(s,
            "Generate a caption to turn the image into a humorous meme that highlights the "
            "Causes of Climate Change to Support it.");
  EXPECT_NE(s.find("highlights the Causes of Climate Change to Support it."), std::string::npos);
}

TEST(Instruction, DenyPhrasingAndSpacedTechnique) {
  const auto s = build_instruction(Taxonomy::builtin(),
                                   {"climate_action", Stance::Deny, T::EvidenceOfAbsence});
  EXPECT_TRUE(s.ends_with("to Deny it."));
  EXPECT_NE(s.find("Evidence of Absence"), std::string::npos);
}

TEST(Instruction, InapplicableCells) {
  const auto& tx = Taxonomy::builtin();
  EXPECT_EQ(code_of([&] { build_instruction(tx, {"gender_equality", Stance::Deny, T::Benefits}); }),
            Errc::InapplicableTechnique);
  EXPECT_EQ(code_of([&] { build_instruction(tx, {"climate_action", Stance::Deny, T::Rationale}); }),
            Errc::InapplicableTechnique);
  EXPECT_EQ(code_of([&] { build_instruction(tx, {"climate_action", Stance::Support, T::Benefits}); }),
            Errc::InapplicableTechnique);
  EXPECT_EQ(code_of([&] { build_instruction(tx, {"nope", Stance::Support, T::Causes}); }),
            Errc::UnknownCause);
}

TEST(Instruction, InjectiveOverBuiltinCells) {
  std::set<std::string> seen;
  const auto cells = Taxonomy::builtin().all_cells();
  for (const auto& c : cells) seen.insert(build_instruction(Taxonomy::builtin(), c));
  EXPECT_EQ(seen.size(), cells.size());
}

TEST(FewShot, FourChainOfThoughtDemosBeforeSeparator) {
  const CampaignCell cell{"climate_action", Stance::Support, T::Causes};
  const auto& demos = pool().demos("climate_action", Stance::Support);
  ASSERT_EQ(demos.size(), 6u);
  auto b = build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), testing::kGoldenDescription, demos);
  const auto sep = b.rendered_text.find("###");
  ASSERT_NE(sep, std::string::npos);
  EXPECT_EQ(count(b.rendered_text.substr(0, sep), "Let's think step"), 4u);
  EXPECT_EQ(b.demonstrations.size(), 4u);
  EXPECT_TRUE(b.cot_prefix_enabled);
  EXPECT_EQ(b.prompt_digest, sha256_hex(b.rendered_text));
  EXPECT_EQ(render_prompt(b), b.rendered_text);
  EXPECT_TRUE(b.rendered_text.ends_with("Output: Let's think step by step."));
  EXPECT_NE(b.rendered_text.find("Image \"Waiting Skeleton\" describing"), std::string::npos);
}

TEST(FewShot, InsufficientDemos) {
  const CampaignCell cell{"climate_action", Stance::Support, T::Causes};
  const auto& demos = pool().demos("climate_action", Stance::Support);
  EXPECT_EQ(code_of([&] { build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), "d", demos, 0); }),
            Errc::InsufficientDemos);
  EXPECT_EQ(code_of([&] { build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), "d", demos, 7); }),
            Errc::InsufficientDemos);
  EXPECT_EQ(code_of([&] {
              build_fewshot_prompt(Taxonomy::builtin(), {"gender_equality", Stance::Deny, T::Benefits},
                                   skeleton(), "d", demos);
            }),
            Errc::InapplicableTechnique);
}

TEST(FewShot, DeterministicAndSeededSelection) {
  const CampaignCell cell{"gender_equality", Stance::Deny, T::Rationale};
  const auto& demos = pool().demos("gender_equality", Stance::Deny);
  auto a = build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), "desc", demos);
  auto b = build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), "desc", demos);
  EXPECT_EQ(a.prompt_digest, b.prompt_digest);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.demonstrations[i].output_text, demos[i].output_text);

  auto s1 = build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), "desc", demos, 4, 99);
  auto s2 = build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), "desc", demos, 4, 99);
  EXPECT_EQ(s1.rendered_text, s2.rendered_text);
  std::set<std::string> distinct;
  for (const auto& d : s1.demonstrations) distinct.insert(d.output_text);
  EXPECT_EQ(distinct.size(), 4u);
}

TEST(ZeroShot, NoDemosNoPrefix) {
  for (const auto& cell : Taxonomy::builtin().all_cells()) {
    auto b = build_zeroshot_prompt(Taxonomy::builtin(), cell, skeleton(), testing::kGoldenDescription);
    EXPECT_TRUE(b.demonstrations.empty());
    EXPECT_FALSE(b.cot_prefix_enabled);
    EXPECT_EQ(b.rendered_text.find("Let's think step"), std::string::npos);
    EXPECT_NE(b.rendered_text.find("Image \"Waiting Skeleton\" describing"), std::string::npos);
    EXPECT_EQ(b.rendered_text,
              build_zeroshot_prompt(Taxonomy::builtin(), cell, skeleton(), testing::kGoldenDescription)
                  .rendered_text);
  }
}

TEST(Goldens, ByteExactForEveryCell) {
  int checked = 0;
  for (const auto& cell : Taxonomy::builtin().all_cells()) {
    auto few = build_fewshot_prompt(Taxonomy::builtin(), cell, skeleton(), testing::kGoldenDescription,
                                    pool().demos(cell.cause_id, cell.stance));
    auto zero = build_zeroshot_prompt(Taxonomy::builtin(), cell, skeleton(), testing::kGoldenDescription);
    EXPECT_EQ(few.rendered_text,
              read_file(testing::testdata_dir() / "prompts" / golden_name(cell, "fewshot")))
        << golden_name(cell, "fewshot");
    EXPECT_EQ(zero.rendered_text,
              read_file(testing::testdata_dir() / "prompts" / golden_name(cell, "zeroshot")))
        << golden_name(cell, "zeroshot");
    checked += 2;
  }
  EXPECT_EQ(checked, 20);
}

// Reassembles a few-shot prompt straight from the pool file, without the
// library's demo loader or renderer.
TEST(Goldens, MatchIndependentAssembly) {
  const auto pool_json = nlohmann::json::parse(read_file(testing::demo_pool_path()));
  for (const auto& cell : Taxonomy::builtin().all_cells()) {
    const nlohmann::json* demos = nullptr;
    for (const auto& entry : pool_json) {
      if (entry["cause_id"] == cell.cause_id && entry["stance"] == std::string(to_string(cell.stance))) {
        demos = &entry["demonstrations"];
      }
    }
    ASSERT_NE(demos, nullptr);
    const std::string topic = cell.cause_id == "climate_action" ? "Climate Change" : "Gender Inequality";
    const std::string instruction =
        "Generate a caption to turn the image into a humorous meme that highlights the " +
        std::string(technique_phrase(cell.technique)) + " of " + topic + " to " +
        std::string(to_string(cell.stance)) + " it.";
    std::string expected;
    for (int i = 0; i < 4; ++i) {
      const auto& d = (*demos)[i];
      expected += "Instruction: " + d["instruction"].get<std::string>() + "\n";
      expected += "Input: Image \"" + d["template_name"].get<std::string>() + "\" describing \"" +
                  d["description_snippet"].get<std::string>() + "\"\n";
      expected += "Output: " + d["output_text"].get<std::string>() + "\n\n";
    }
    expected += "###\nInstruction: " + instruction + "\n";
    expected += "Input: Image \"Waiting Skeleton\" describing \"" +
                std::string(testing::kGoldenDescription) + "\"\n";
    const std::string zero = expected.substr(expected.find("###\n") + 4) + "Output:";
    expected += "Output: Let's think step by step.";
    EXPECT_EQ(read_file(testing::testdata_dir() / "prompts" / golden_name(cell, "fewshot")), expected);
    EXPECT_EQ(read_file(testing::testdata_dir() / "prompts" / golden_name(cell, "zeroshot")), zero);
  }
}

TEST(DemoPool, ShippedPoolShape) {
  for (const auto& cause : Taxonomy::builtin().cause_ids()) {
    for (auto s : {Stance::Support, Stance::Deny}) {
      const auto& demos = pool().demos(cause, s);
      EXPECT_EQ(demos.size(), 6u);
      for (const auto& d : demos) {
        EXPECT_TRUE(d.output_text.starts_with(kCotPrefix));
        EXPECT_NE(d.output_text.find("Caption at top:"), std::string::npos);
      }
    }
  }
  EXPECT_EQ(code_of([] { DemoPool::load("/nonexistent/pool.json"); }), Errc::FileMissing);
}

TEST(Taxonomy, RuntimeRegistration) {
  Taxonomy tx;
  tx.register_cause({"clean_water", "Clean Water", "Water Scarcity"},
                    {{Stance::Support, {T::Solutions}}, {Stance::Deny, {T::EvidenceOfAbsence}}});
  EXPECT_EQ(build_instruction(tx, {"clean_water", Stance::Support, T::Solutions}),
            "Generate a caption to turn the image into a humorous meme that highlights the "
            "Solutions of Water Scarcity to Support it.");
  EXPECT_EQ(code_of([&] { tx.register_cause({"climate_action", "X", "Y"}, {{Stance::Support, {T::Causes}}}); }),
            Errc::ConfigError);
  EXPECT_EQ(code_of([&] { tx.register_cause({"Bad Id", "X", "Y"}, {{Stance::Support, {T::Causes}}}); }),
            Errc::ConfigError);
  EXPECT_EQ(code_of([&] { tx.register_cause({"empty_set", "X", "Y"}, {{Stance::Support, {}}}); }),
            Errc::ConfigError);
  EXPECT_FALSE(Taxonomy::builtin().has_cause("clean_water"));
}

TEST(Names, RoundTrip) {
  for (auto t : kAllTechniques) EXPECT_EQ(technique_from_string(to_string(t)), t);
  EXPECT_EQ(technique_phrase(T::EvidenceOfAbsence), "Evidence of Absence");
  EXPECT_EQ(stance_from_string("deny"), Stance::Deny);
  EXPECT_EQ(code_of([] { stance_from_string("maybe"); }), Errc::SchemaError);
  EXPECT_EQ(cell_key({"climate_action", Stance::Support, T::Causes}), "climate_action/Support/Causes");
}

}  // namespace
}  // namespace memeforge
