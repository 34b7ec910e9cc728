// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/review.hpp"

#include <chrono>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "memeforge/error.hpp"
#include "memeforge/text.hpp"

namespace memeforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

ReviewConfig review_config_from_json(const json& j, const fs::path& base_dir) {
  auto path = [&](const char* key) -> fs::path {
    if (!j.contains(key) || !j[key].is_string()) return {};
    fs::path p(j[key].get<std::string>());
    return p.is_relative() ? (base_dir / p).lexically_normal() : p;
  };
  ReviewConfig c;
  try {
    c.admin_token = j.at("admin_token").get<std::string>();
    for (const auto& e : j.at("evaluators")) {
      SessionToken t;
      t.evaluator_id = e.at("evaluator_id").get<std::string>();
      t.token = e.at("token").get<std::string>();
      if (e.contains("expires_at") && e["expires_at"].is_number_integer()) {
        t.expires_at = e["expires_at"].get<std::int64_t>();
      }
      c.tokens.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("review config: ") + e.what());
  }
  c.image_dir = path("image_dir");
  c.assignments_path = path("assignments");
  c.ratings_path = path("ratings");
  c.manifest_path = path("manifest");
  if (auto ui = path("ui_dir"); !ui.empty()) c.ui_dir = ui;
  if (c.admin_token.empty()) throw Error(Errc::ConfigError, "admin_token is empty");
  std::set<std::string> tokens{c.admin_token};
  for (const auto& t : c.tokens) {
    if (t.token.empty() || !tokens.insert(t.token).second) {
      throw Error(Errc::ConfigError, "tokens must be nonempty and unique");
    }
  }
  return c;
}

namespace {

ApiReply error_reply(int status, std::string_view code, const std::string& message) {
  return {status, {{"code", code}, {"message", message}}};
}

ApiReply auth_failure() {
  return error_reply(401, "auth_error", "missing, unknown or expired token");
}

std::int64_t system_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool valid_meme_id(const std::string& id) {
  static const std::regex kId("[A-Za-z0-9_.-]{1,200}");
  return std::regex_match(id, kId) && id.find("..") == std::string::npos;
}

}  // namespace

ReviewService::ReviewService(ReviewConfig config, std::function<std::int64_t()> clock)
    : config_(std::move(config)),
      clock_(clock ? std::move(clock) : system_clock_seconds),
      store_(config_.ratings_path) {
  if (config_.ratings_path.empty()) throw Error(Errc::ConfigError, "ratings path is required");
  if (!fs::is_regular_file(config_.assignments_path)) {
    throw Error(Errc::FileMissing, "assignments not found: " + config_.assignments_path.string());
  }
  for (const auto& j : read_jsonl(config_.assignments_path)) {
    assignments_.push_back(assignment_from_json(j));
  }
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    for (const auto& e : assignments_[i].evaluator_ids) by_evaluator_[e].push_back(i);
  }
  if (!config_.manifest_path.empty()) {
    const Taxonomy& taxonomy = Taxonomy::builtin();
    for (const auto& a : read_manifest(config_.manifest_path)) {
      cause_display_[a.meme_id] = taxonomy.has_cause(a.cell.cause_id)
                                      ? taxonomy.cause(a.cell.cause_id).display_name
                                      : a.cell.cause_id;
      cell_of_[a.meme_id] = std::string(to_string(a.cell.backend_id)) + "|" + cell_key(a.cell.cell());
    }
  }
  // Done status is whatever the ratings log says survived.
  for (const auto& r : store_.latest()) done_.insert({r.meme_id, r.evaluator_id});
  spdlog::info("review: {} assignments, {} ratings replayed", assignments_.size(), done_.size());
}

std::optional<std::string> ReviewService::authenticate(const std::string& bearer) const {
  if (bearer.empty()) return std::nullopt;
  for (const auto& t : config_.tokens) {
    if (t.token != bearer) continue;
    if (t.expires_at && clock_() >= *t.expires_at) return std::nullopt;
    return t.evaluator_id;
  }
  return std::nullopt;
}

int ReviewService::remaining_for(const std::string& evaluator_id) const {
  auto it = by_evaluator_.find(evaluator_id);
  if (it == by_evaluator_.end()) return 0;
  int n = 0;
  for (std::size_t i : it->second) {
    if (!done_.contains({assignments_[i].meme_id, evaluator_id})) ++n;
  }
  return n;
}

ApiReply ReviewService::next_task(const std::string& bearer) const {
  const auto evaluator = authenticate(bearer);
  if (!evaluator) return auth_failure();
  std::shared_lock lock(mu_);
  const int remaining = remaining_for(*evaluator);
  auto it = by_evaluator_.find(*evaluator);
  if (it != by_evaluator_.end()) {
    for (std::size_t i : it->second) {
      const std::string& meme = assignments_[i].meme_id;
      if (done_.contains({meme, *evaluator})) continue;
      auto cause = cause_display_.find(meme);
      return {200,
              {{"status", "task"},
               {"meme_id", meme},
               {"image_url", "/memes/" + meme + ".png"},
               {"cause", cause == cause_display_.end() ? "" : cause->second},
               {"remaining", remaining}}};
    }
  }
  return {200, {{"status", "none_left"}, {"remaining", 0}}};
}

ApiReply ReviewService::submit_rating(const std::string& bearer, const std::string& body) {
  const auto evaluator = authenticate(bearer);
  if (!evaluator) return auth_failure();
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return error_reply(400, "bad_request", "body is not JSON");
  Rating rating;
  try {
    rating = rating_from_json(j);
    if (!rating.evaluator_id.empty() && rating.evaluator_id != *evaluator) {
      return error_reply(403, "not_assigned", "rating names a different evaluator");
    }
    rating.evaluator_id = *evaluator;
    rating.submitted_at.clear();
    validate(rating);
  } catch (const Error& e) {
    return error_reply(422, "range_error", e.what());
  }
  {
    std::shared_lock lock(mu_);
    auto it = by_evaluator_.find(*evaluator);
    bool assigned = false;
    if (it != by_evaluator_.end()) {
      for (std::size_t i : it->second) assigned = assigned || assignments_[i].meme_id == rating.meme_id;
    }
    if (!assigned) {
      return error_reply(403, "not_assigned", "meme " + rating.meme_id + " is not assigned to you");
    }
  }
  bool stored = false;
  try {
    stored = store_.submit(rating);
  } catch (const Error& e) {
    return error_reply(422, "range_error", e.what());
  }
  std::unique_lock lock(mu_);
  done_.insert({rating.meme_id, *evaluator});
  return {200,
          {{"status", "ok"},
           {"meme_id", rating.meme_id},
           {"stored", stored},
           {"remaining", remaining_for(*evaluator)}}};
}

ApiReply ReviewService::progress(const std::string& bearer) const {
  if (bearer.empty() || bearer != config_.admin_token) return auth_failure();
  std::shared_lock lock(mu_);
  std::map<std::string, std::pair<int, int>> per_evaluator;
  std::map<std::string, std::pair<int, int>> per_cell;
  for (const auto& t : config_.tokens) per_evaluator[t.evaluator_id];
  int slots = 0, done = 0;
  for (const auto& a : assignments_) {
    auto cell = cell_of_.find(a.meme_id);
    auto& c = per_cell[cell == cell_of_.end() ? "unknown" : cell->second];
    for (const auto& e : a.evaluator_ids) {
      const bool is_done = done_.contains({a.meme_id, e});
      auto& pe = per_evaluator[e];
      ++pe.first;
      ++c.first;
      ++slots;
      if (is_done) {
        ++pe.second;
        ++c.second;
        ++done;
      }
    }
  }
  json evaluators = json::array();
  for (const auto& [id, p] : per_evaluator) {
    evaluators.push_back({{"evaluator_id", id}, {"assigned", p.first}, {"done", p.second}});
  }
  json cells = json::array();
  for (const auto& [id, p] : per_cell) {
    cells.push_back({{"cell", id}, {"assigned", p.first}, {"done", p.second}});
  }
  return {200,
          {{"evaluators", std::move(evaluators)},
           {"cells", std::move(cells)},
           {"total_slots", slots},
           {"done_slots", done}}};
}

std::optional<std::string> ReviewService::meme_image(const std::string& meme_id) const {
  if (!valid_meme_id(meme_id) || config_.image_dir.empty()) return std::nullopt;
  bool known = false;
  for (const auto& a : assignments_) known = known || a.meme_id == meme_id;
  if (!known) return std::nullopt;
  const fs::path p = config_.image_dir / (meme_id + ".png");
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  return read_file(p);
}

std::string bearer_token(std::string_view header) {
  header = text::trim(header);
  if (!text::starts_with_icase(header, "bearer ")) return {};
  return std::string(text::trim(header.substr(7)));
}

// ---------------------------------------------------------------------------

struct ReviewServer::Impl {
  ReviewService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ReviewService& s) : service(s) {
    auto send = [](httplib::Response& res, const ApiReply& reply) {
      res.status = reply.status;
      res.set_content(reply.body.dump(), "application/json");
    };
    auto token = [](const httplib::Request& req) {
      return bearer_token(req.get_header_value("Authorization"));
    };
    server.Get("/api/task", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.next_task(token(req)));
    });
    server.Post("/api/rating", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.submit_rating(token(req), req.body));
    });
    server.Get("/api/progress", [=, this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.progress(token(req)));
    });
    server.Get(R"(/memes/([^/]+)\.png)",
               [=, this](const httplib::Request& req, httplib::Response& res) {
                 auto bytes = service.meme_image(req.matches[1].str());
                 if (!bytes) {
                   send(res, error_reply(404, "not_found", "no such meme image"));
                   return;
                 }
                 res.set_content(*bytes, "image/png");
               });
    if (service.config().ui_dir) {
      server.set_mount_point("/", service.config().ui_dir->string());
    }
  }
};

ReviewServer::ReviewServer(ReviewService& service) : impl_(std::make_unique<Impl>(service)) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(Errc::IoError, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ReviewServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(Errc::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace memeforge
