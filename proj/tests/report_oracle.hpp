// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "memeforge/eval.hpp"

namespace memeforge::testing {

// Reference implementation: one pass over the ratings into hash maps keyed
// by cell, then per-meme means. Shares nothing with build_report.
struct OracleCell {
  std::unordered_map<std::string, std::array<double, 5>> per_meme;  // auth, sup, deny, hate, n
  std::array<int, 5> hil{}, per{};
  int generated = 0, kept = 0, rejected = 0;
};

inline std::string oracle_key(const std::string& source, const std::optional<std::string>& cause,
                              std::optional<Technique> technique, std::optional<Stance> stance, bool group) {
  std::string k = source + "\x1f" + cause.value_or("");
  if (!group) {
    k += "\x1f" + (technique ? std::string(to_string(*technique)) : "") + "\x1f" +
         (stance ? std::string(to_string(*stance)) : "");
  }
  return k;
}

inline std::string oracle_key(const MemeInfo& m, bool group) {
  return oracle_key(m.source, m.cause_id, m.technique, m.stance, group);
}

inline std::unordered_map<std::string, OracleCell> oracle_cells(const std::vector<Rating>& rs,
                                                                const std::vector<MemeInfo>& infos,
                                                                bool group) {
  std::unordered_map<std::string, const MemeInfo*> by_id;
  for (const auto& m : infos) by_id[m.meme_id] = &m;
  std::unordered_map<std::string, OracleCell> out;
  for (const auto& m : infos) {
    auto& c = out[oracle_key(m, group)];
    ++c.generated;
    c.kept += m.status == MemeStatus::Kept;
    c.rejected += m.status == MemeStatus::RejectedHateful;
  }
  for (const auto& r : rs) {
    auto& c = out[oracle_key(*by_id.at(r.meme_id), group)];
    auto& acc = c.per_meme[r.meme_id];
    acc[0] += r.authenticity;
    acc[1] += r.conveyance == Conveyance::Support;
    acc[2] += r.conveyance == Conveyance::Deny;
    acc[3] += r.hateful;
    acc[4] += 1;
    ++c.hil[r.hilarity - 1];
    ++c.per[r.persuasiveness - 1];
  }
  return out;
}

inline double oracle_mean(const OracleCell& c, int field) {
  double s = 0;
  for (const auto& [_, acc] : c.per_meme) s += acc[field] / acc[4];
  return s / c.per_meme.size();
}

inline int oracle_lower_median(const std::array<int, 5>& h) {
  int n = 0;
  for (int v : h) n += v;
  int need = (n - 1) / 2 + 1;  // 1-based rank of the lower median
  for (int i = 0; i < 5; ++i) {
    need -= h[i];
    if (need <= 0) return i + 1;
  }
  return 0;
}

/// Fills a random store: memes across sources and cells, 0-4 raters each.
inline void random_store(std::mt19937_64& gen, std::vector<MemeInfo>& infos, std::vector<Rating>& rs) {
  const std::vector<std::string> sources = {"ChatGPT", "LLaMA", "LLaVA", "Online Random"};
  const auto cells = Taxonomy::builtin().all_cells();
  const int n = 5 + static_cast<int>(gen() % 120);
  for (int i = 0; i < n; ++i) {
    MemeInfo m;
    m.meme_id = "m" + std::to_string(gen() % 1000000) + "-" + std::to_string(i);
    m.source = sources[gen() % sources.size()];
    if (m.source != "Online Random") {
      const auto& cell = cells[gen() % cells.size()];
      m.cause_id = cell.cause_id;
      m.stance = cell.stance;
      m.technique = cell.technique;
      m.status = static_cast<MemeStatus>(gen() % 3);
    } else if (gen() % 2) {
      m.cause_id = "climate_action";
    }
    infos.push_back(m);
    const int raters = static_cast<int>(gen() % 5);
    for (int r = 0; r < raters; ++r) {
      Rating x;
      x.meme_id = m.meme_id;
      x.evaluator_id = "e" + std::to_string(r);
      x.authenticity = gen() % 2;
      x.conveyance = static_cast<Conveyance>(gen() % 3);
      x.hateful = gen() % 7 == 0;
      x.hilarity = 1 + static_cast<int>(gen() % 5);
      x.persuasiveness = 1 + static_cast<int>(gen() % 5);
      rs.push_back(x);
    }
  }
}

/// First disagreement between computed metrics and the oracle, if any.
inline std::optional<std::string> oracle_mismatch(const std::vector<CellMetrics>& got,
                                                  const std::vector<Rating>& rs,
                                                  const std::vector<MemeInfo>& infos, bool group,
                                                  double tol = 1e-9) {
  const auto want = oracle_cells(rs, infos, group);
  if (got.size() != want.size()) return fmt::format("{} rows, oracle has {}", got.size(), want.size());
  auto near = [&](const std::optional<double>& v, double w) { return v && std::fabs(*v - w) <= tol; };
  for (const auto& m : got) {
    const std::string key = oracle_key(m.source, m.cause_id, m.technique, m.stance, group);
    auto it = want.find(key);
    if (it == want.end()) return "unexpected row " + key;
    const auto& c = it->second;
    auto fail = [&](const char* what) { return std::optional<std::string>(std::string(what) + " differs for " + key); };
    if (m.generated != c.generated) return fail("generated");
    if (m.rated_memes != static_cast<int>(c.per_meme.size())) return fail("rated_memes");
    if (c.kept + c.rejected > 0) {
      if (!near(m.machine_hatefulness, static_cast<double>(c.rejected) / (c.kept + c.rejected))) {
        return fail("machine_hatefulness");
      }
    } else if (m.machine_hatefulness) {
      return fail("machine_hatefulness");
    }
    if (c.per_meme.empty()) {
      if (m.authenticity || m.conveyance_support || m.conveyance_deny || m.human_hatefulness ||
          m.hilarity.total != 0 || m.persuasiveness.total != 0) {
        return fail("unrated scores");
      }
      continue;
    }
    if (!near(m.authenticity, oracle_mean(c, 0))) return fail("authenticity");
    if (!near(m.conveyance_support, oracle_mean(c, 1))) return fail("conveyance_support");
    if (!near(m.conveyance_deny, oracle_mean(c, 2))) return fail("conveyance_deny");
    if (!near(m.human_hatefulness, oracle_mean(c, 3))) return fail("human_hatefulness");
    if (m.hilarity.histogram != c.hil || m.persuasiveness.histogram != c.per) return fail("histogram");
    if (m.hilarity.median != oracle_lower_median(c.hil)) return fail("hilarity median");
    if (m.persuasiveness.median != oracle_lower_median(c.per)) return fail("persuasiveness median");
  }
  return std::nullopt;
}

}  // namespace memeforge::testing
