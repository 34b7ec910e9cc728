// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace memeforge {

/// A named blank image with one or two caption slots.
struct MemeTemplate {
  std::string template_id;
  std::string name;
  /// As written in the catalog: a path relative to the catalog file, an
  /// absolute path, or an http(s) URL.
  std::string image_ref;
  /// Local file the image was resolved to; empty for URL references.
  std::string image_path;
  int box_count = 2;
  int width_px = 0;
  int height_px = 0;

  bool is_remote() const { return image_path.empty(); }
  bool operator==(const MemeTemplate&) const = default;
};

struct SkippedRow {
  std::size_t row = 0;  // 1-based data row (header and comments excluded)
  std::string reason;
};

/// Immutable after ingest; iteration order is sorted by template_id.
struct Catalog {
  std::vector<MemeTemplate> templates;
  std::string source_digest;
  std::vector<SkippedRow> skipped;
  std::size_t data_rows = 0;

  std::size_t size() const { return templates.size(); }
  const MemeTemplate* find(std::string_view template_id) const;
};

/// Reads a catalog CSV (header
/// `template_id,name,image_ref,box_count,width_px,height_px`, box_count
/// optional). Invalid rows are skipped, reported in `Catalog::skipped` and
/// written to `diagnostics` as `SKIP row=<n> reason=<text>`.
///
/// Throws Error{FileMissing, SchemaError, EmptyCatalog}.
Catalog ingest_catalog(const std::filesystem::path& path,
                       std::ostream* diagnostics = nullptr);

/// `n` distinct templates in a seed-determined order.
/// Throws Error{NOutOfRange} unless 1 <= n <= catalog.size().
std::vector<MemeTemplate> sample_templates(const Catalog& catalog,
                                           std::size_t n, std::uint64_t seed);

/// One template drawn uniformly (with replacement across calls).
const MemeTemplate& draw_template(const Catalog& catalog, std::uint64_t seed);

nlohmann::json to_json(const MemeTemplate& t);
MemeTemplate template_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Catalog& c);

/// Splits one CSV record per RFC 4180 quoting rules. Returns false on an
/// unterminated quote.
bool split_csv_line(std::string_view line, std::vector<std::string>& fields);

}  // namespace memeforge
