// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include <fmt/format.h>

#include "memeforge/error.hpp"
#include "memeforge/eval.hpp"
#include "memeforge/jsonl.hpp"

namespace memeforge {

namespace {

std::string cause_label(const std::optional<std::string>& cause_id, const Taxonomy& taxonomy) {
  if (!cause_id) return "All";
  return taxonomy.has_cause(*cause_id) ? taxonomy.cause(*cause_id).display_name : *cause_id;
}

std::string num(const std::optional<double>& v) {
  return v ? fmt::format("{:.2f}", *v) : std::string("n/a");
}

// Full precision for CSV so downstream tools can recompute.
std::string csv_num(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string median(const ScoreDistribution& d) {
  return d.total ? std::to_string(d.median) : std::string("n/a");
}

std::string hist(const ScoreDistribution& d) {
  return fmt::format("{}/{}/{}/{}/{}", d.histogram[0], d.histogram[1], d.histogram[2],
                     d.histogram[3], d.histogram[4]);
}

}  // namespace

std::string render_report_text(const MetricsReport& report, const Taxonomy& taxonomy) {
  std::ostringstream out;
  out << "Authenticity (source, cause, score)\n";
  for (const auto& g : report.groups) {
    out << g.source << ", " << cause_label(g.cause_id, taxonomy) << ", " << num(g.authenticity)
        << "\n";
  }
  out << "\nMessage conveyance (source, cause, stance, technique, support, deny, rated)\n";
  for (const auto& c : report.cells) {
    if (!c.stance || !c.technique) continue;
    out << c.source << ", " << cause_label(c.cause_id, taxonomy) << ", " << to_string(*c.stance)
        << ", " << technique_phrase(*c.technique) << ", " << num(c.conveyance_support) << ", "
        << num(c.conveyance_deny) << ", " << c.rated_memes << "\n";
  }
  out << "\nHatefulness (source, cause, human, machine)\n";
  for (const auto& g : report.groups) {
    out << g.source << ", " << cause_label(g.cause_id, taxonomy) << ", "
        << num(g.human_hatefulness) << ", " << num(g.machine_hatefulness) << "\n";
  }
  out << "\nScore distributions (source, cause, hilarity median, hilarity 1..5, "
         "persuasiveness median, persuasiveness 1..5)\n";
  for (const auto& g : report.groups) {
    out << g.source << ", " << cause_label(g.cause_id, taxonomy) << ", " << median(g.hilarity)
        << ", " << hist(g.hilarity) << ", " << median(g.persuasiveness) << ", "
        << hist(g.persuasiveness) << "\n";
  }
  return out.str();
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir,
                  const Taxonomy& taxonomy) {
  std::filesystem::create_directories(dir);
  auto cause = [&](const CellMetrics& m) { return csv_field(cause_label(m.cause_id, taxonomy)); };

  std::string auth = "source,cause,rated_memes,ratings,authenticity\n";
  std::string hate = "source,cause,generated,machine_flagged,machine_hatefulness,rated_memes,"
                     "human_hatefulness\n";
  std::string dist = "source,cause,metric,n1,n2,n3,n4,n5,median\n";
  for (const auto& g : report.groups) {
    auth += fmt::format("{},{},{},{},{}\n", csv_field(g.source), cause(g), g.rated_memes,
                        g.ratings, csv_num(g.authenticity));
    hate += fmt::format("{},{},{},{},{},{},{}\n", csv_field(g.source), cause(g), g.generated,
                        g.machine_flagged, csv_num(g.machine_hatefulness), g.rated_memes,
                        csv_num(g.human_hatefulness));
    for (const auto& [name, d] : {std::pair{"hilarity", &g.hilarity},
                                  std::pair{"persuasiveness", &g.persuasiveness}}) {
      dist += fmt::format("{},{},{},{},{},{},{},{},{}\n", csv_field(g.source), cause(g), name,
                          d->histogram[0], d->histogram[1], d->histogram[2], d->histogram[3],
                          d->histogram[4], d->total ? std::to_string(d->median) : "");
    }
  }

  std::string conv = "source,cause,stance,technique,rated_memes,conveyance_support,conveyance_deny\n";
  std::string cells = "source,cause,stance,technique,generated,machine_flagged,rated_memes,ratings,"
                      "authenticity,conveyance_support,conveyance_deny,human_hatefulness,"
                      "machine_hatefulness,hilarity_median,persuasiveness_median\n";
  for (const auto& c : report.cells) {
    const std::string stance = c.stance ? std::string(to_string(*c.stance)) : "";
    const std::string technique = c.technique ? std::string(to_string(*c.technique)) : "";
    if (c.stance && c.technique) {
      conv += fmt::format("{},{},{},{},{},{},{}\n", csv_field(c.source), cause(c), stance,
                          technique, c.rated_memes, csv_num(c.conveyance_support),
                          csv_num(c.conveyance_deny));
    }
    cells += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(c.source),
                         cause(c), stance, technique, c.generated, c.machine_flagged,
                         c.rated_memes, c.ratings, csv_num(c.authenticity),
                         csv_num(c.conveyance_support), csv_num(c.conveyance_deny),
                         csv_num(c.human_hatefulness), csv_num(c.machine_hatefulness),
                         c.hilarity.total ? std::to_string(c.hilarity.median) : "",
                         c.persuasiveness.total ? std::to_string(c.persuasiveness.median) : "");
  }

  write_file_atomic(dir / "authenticity.csv", auth);
  write_file_atomic(dir / "conveyance.csv", conv);
  write_file_atomic(dir / "hatefulness.csv", hate);
  write_file_atomic(dir / "distributions.csv", dist);
  write_file_atomic(dir / "cells.csv", cells);
  write_file_atomic(dir / "summary.txt", render_report_text(report, taxonomy));
}

}  // namespace memeforge
