// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/jsonl.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <fmt/format.h>

#include "memeforge/error.hpp"

namespace memeforge {

namespace fs = std::filesystem;

std::vector<nlohmann::json> read_jsonl(const fs::path& path,
                                       std::size_t* skipped) {
  std::vector<nlohmann::json> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto parsed = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded() || !parsed.is_object()) {
      if (skipped) ++*skipped;
      continue;
    }
    out.push_back(std::move(parsed));
  }
  return out;
}

JsonlAppender::JsonlAppender(const fs::path& path) : path_(path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  // A torn final line (no trailing newline) must not swallow the next record.
  bool needs_newline = false;
  {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (in && in.tellg() > 0) {
      in.seekg(-1, std::ios::end);
      char last = 0;
      in.get(last);
      needs_newline = last != '\n';
    }
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw Error(Errc::IoError, "cannot open " + path.string());
  if (needs_newline) out_ << '\n' << std::flush;
}

void JsonlAppender::append(const nlohmann::json& record) {
  std::string line = record.dump();
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::IoError, "write failed: " + path_.string());
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(Errc::IoError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_jsonl_atomic(const fs::path& path,
                        const std::vector<nlohmann::json>& records) {
  std::string buf;
  for (const auto& r : records) {
    buf += r.dump();
    buf += '\n';
  }
  write_file_atomic(path, buf);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileMissing, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string utc_now_iso() {
  using namespace std::chrono;
  const auto now = system_clock::now();
  const auto ms = duration_cast<milliseconds>(now.time_since_epoch()) % 1000;
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z",
                     tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                     tm.tm_min, tm.tm_sec, ms.count());
}

}  // namespace memeforge
