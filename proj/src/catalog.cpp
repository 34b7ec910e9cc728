// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "memeforge/digest.hpp"
#include "memeforge/error.hpp"
#include "memeforge/jsonl.hpp"
#include "memeforge/random.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kRequired[] = {"template_id", "name", "image_ref",
                                          "width_px", "height_px"};
constexpr std::string_view kBoxCount = "box_count";

std::optional<int> parse_int(std::string_view s) {
  s = text::trim(s);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return value;
}

bool is_url(std::string_view ref) {
  for (std::string_view scheme : {"http://", "https://"}) {
    if (text::starts_with_icase(ref, scheme)) {
      std::string_view rest = ref.substr(scheme.size());
      return !rest.empty() && rest.front() != '/';
    }
  }
  return false;
}

std::vector<std::string_view> split_lines(std::string_view data) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= data.size()) {
    std::size_t end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    std::string_view line = data.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == data.size()) break;
    start = end + 1;
  }
  return lines;
}

}  // namespace

bool split_csv_line(std::string_view line, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && text::trim(field).empty() && !was_quoted) {
      field.clear();
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : std::string(text::trim(field)));
      field.clear();
      was_quoted = false;
    } else if (!was_quoted) {
      field.push_back(c);
    }
  }
  if (quoted) return false;
  fields.push_back(was_quoted ? field : std::string(text::trim(field)));
  return true;
}

const MemeTemplate* Catalog::find(std::string_view template_id) const {
  auto it = std::lower_bound(
      templates.begin(), templates.end(), template_id,
      [](const MemeTemplate& t, std::string_view id) { return t.template_id < id; });
  if (it == templates.end() || it->template_id != template_id) return nullptr;
  return &*it;
}

Catalog ingest_catalog(const fs::path& path, std::ostream* diagnostics) {
  if (!fs::is_regular_file(path)) {
    throw Error(Errc::FileMissing, "catalog not found: " + path.string());
  }
  const std::string data = read_file(path);
  std::string_view body = data;
  if (body.starts_with("\xEF\xBB\xBF")) body.remove_prefix(3);

  const fs::path base_dir = fs::absolute(path).parent_path();
  Catalog catalog;
  catalog.source_digest = sha256_hex(data);

  std::map<std::string, std::size_t> column_index;
  bool have_header = false;
  std::set<std::string> seen_ids;
  std::vector<std::string> fields;

  auto skip = [&](std::size_t row, std::string reason) {
    if (diagnostics) *diagnostics << "SKIP row=" << row << " reason=" << reason << '\n';
    catalog.skipped.push_back({row, std::move(reason)});
  };

  for (std::string_view line : split_lines(body)) {
    std::string_view trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;

    if (!have_header) {
      if (!split_csv_line(trimmed, fields)) {
        throw Error(Errc::SchemaError, "unterminated quote in header");
      }
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const std::string& name = fields[i];
        bool known = name == kBoxCount ||
                     std::find(std::begin(kRequired), std::end(kRequired), name) !=
                         std::end(kRequired);
        if (!known) throw Error(Errc::SchemaError, "unknown column '" + name + "'");
        if (!column_index.emplace(name, i).second) {
          throw Error(Errc::SchemaError, "duplicate column '" + name + "'");
        }
      }
      for (std::string_view required : kRequired) {
        if (!column_index.contains(std::string(required))) {
          throw Error(Errc::SchemaError,
                      "missing column '" + std::string(required) + "'");
        }
      }
      have_header = true;
      continue;
    }

    const std::size_t row = ++catalog.data_rows;
    if (!split_csv_line(line, fields)) {
      skip(row, "unterminated quote");
      continue;
    }
    if (fields.size() != column_index.size()) {
      skip(row, "expected " + std::to_string(column_index.size()) + " fields, got " +
                    std::to_string(fields.size()));
      continue;
    }
    auto col = [&](std::string_view name) -> const std::string& {
      return fields[column_index.at(std::string(name))];
    };

    MemeTemplate t;
    t.template_id = col("template_id");
    t.name = col("name");
    t.image_ref = col("image_ref");
    if (t.template_id.empty()) {
      skip(row, "empty template_id");
      continue;
    }
    if (t.name.empty()) {
      skip(row, "empty name");
      continue;
    }
    if (column_index.contains(std::string(kBoxCount))) {
      auto box = parse_int(col(kBoxCount));
      if (!box || (*box != 1 && *box != 2)) {
        skip(row, "box_count must be 1 or 2");
        continue;
      }
      t.box_count = *box;
    }
    auto width = parse_int(col("width_px"));
    auto height = parse_int(col("height_px"));
    if (!width || *width <= 0) {
      skip(row, "invalid width_px");
      continue;
    }
    if (!height || *height <= 0) {
      skip(row, "invalid height_px");
      continue;
    }
    t.width_px = *width;
    t.height_px = *height;

    if (t.image_ref.empty()) {
      skip(row, "empty image_ref");
      continue;
    }
    if (!is_url(t.image_ref)) {
      fs::path p(t.image_ref);
      if (p.is_relative()) p = base_dir / p;
      p = p.lexically_normal();
      std::error_code ec;
      if (!fs::is_regular_file(p, ec)) {
        skip(row, "image not found: " + t.image_ref);
        continue;
      }
      t.image_path = p.string();
    }
    if (!seen_ids.insert(t.template_id).second) {
      skip(row, "duplicate id");
      continue;
    }
    catalog.templates.push_back(std::move(t));
  }

  if (!have_header) throw Error(Errc::SchemaError, "missing header");
  if (catalog.templates.empty()) {
    throw Error(Errc::EmptyCatalog, "no valid rows in " + path.string());
  }
  std::sort(catalog.templates.begin(), catalog.templates.end(),
            [](const MemeTemplate& a, const MemeTemplate& b) {
              return a.template_id < b.template_id;
            });
  return catalog;
}

std::vector<MemeTemplate> sample_templates(const Catalog& catalog,
                                           std::size_t n, std::uint64_t seed) {
  if (n < 1 || n > catalog.size()) {
    throw Error(Errc::NOutOfRange, "n=" + std::to_string(n) + " outside [1, " +
                                       std::to_string(catalog.size()) + "]");
  }
  // Partial Fisher-Yates over indices.
  std::vector<std::size_t> idx(catalog.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  std::vector<MemeTemplate> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
    out.push_back(catalog.templates[idx[i]]);
  }
  return out;
}

const MemeTemplate& draw_template(const Catalog& catalog, std::uint64_t seed) {
  if (catalog.templates.empty()) throw Error(Errc::EmptyCatalog, "empty catalog");
  Rng rng(seed);
  return catalog.templates[rng.below(catalog.size())];
}

nlohmann::json to_json(const MemeTemplate& t) {
  return {{"template_id", t.template_id}, {"name", t.name},
          {"image_ref", t.image_ref},     {"image_path", t.image_path},
          {"box_count", t.box_count},     {"width_px", t.width_px},
          {"height_px", t.height_px}};
}

MemeTemplate template_from_json(const nlohmann::json& j) {
  MemeTemplate t;
  t.template_id = j.at("template_id").get<std::string>();
  t.name = j.at("name").get<std::string>();
  t.image_ref = j.at("image_ref").get<std::string>();
  t.image_path = j.value("image_path", std::string{});
  t.box_count = j.value("box_count", 2);
  t.width_px = j.at("width_px").get<int>();
  t.height_px = j.at("height_px").get<int>();
  return t;
}

nlohmann::json to_json(const Catalog& c) {
  nlohmann::json templates = nlohmann::json::array();
  for (const auto& t : c.templates) templates.push_back(to_json(t));
  nlohmann::json skipped = nlohmann::json::array();
  for (const auto& s : c.skipped) skipped.push_back({{"row", s.row}, {"reason", s.reason}});
  return {{"source_digest", c.source_digest},
          {"data_rows", c.data_rows},
          {"templates", std::move(templates)},
          {"skipped", std::move(skipped)}};
}

}  // namespace memeforge
