// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace memeforge {

/// Reads a JSONL file. A missing file yields an empty list. Lines that do not
/// parse (for example a torn final line after a crash) are skipped and
/// counted in `skipped` when provided.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path,
                                       std::size_t* skipped = nullptr);

/// Serialized append-only sink. Each record is written as one line and
/// flushed before append() returns.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path);

  void append(const nlohmann::json& record);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Writes `records` to `path` atomically (temp file + rename).
void write_jsonl_atomic(const std::filesystem::path& path,
                        const std::vector<nlohmann::json>& records);

std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// UTC timestamp, ISO-8601 with milliseconds.
std::string utc_now_iso();

}  // namespace memeforge
