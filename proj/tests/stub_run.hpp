// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include "memeforge/orchestrator.hpp"
#include "test_support.hpp"

namespace memeforge::testing {

/// Everything a stub-mode campaign needs, wired like `memeforge run --stub`.
struct StubRun {
  RunConfig config = default_run_config(data_dir());
  Catalog catalog = ingest_catalog(config.catalog_path);
  DemoPool demos = DemoPool::load(config.demo_pool_path);
  std::shared_ptr<const Font> font = Font::load(config.style.font_ref);
  std::shared_ptr<StubChatTransport> transport;
  std::unique_ptr<ModelGateway> gateway;
  std::unique_ptr<Classifier> classifier;
  std::unique_ptr<DescriptionCache> descriptions;

  explicit StubRun(std::unique_ptr<Classifier> cls = std::make_unique<StubClassifier>(),
                   StubBehavior behavior = {}) {
    transport = std::make_shared<StubChatTransport>(std::move(behavior));
    GatewayOptions o;
    o.max_in_flight = config.max_in_flight;
    o.sleep = [](std::chrono::milliseconds) {};
    gateway = std::make_unique<ModelGateway>(transport, o);
    classifier = std::move(cls);
    descriptions = std::make_unique<DescriptionCache>();
  }

  RunContext context() {
    return {&catalog, &Taxonomy::builtin(), &demos, font, gateway.get(), classifier.get(),
            descriptions.get()};
  }

  RunResult run(const CampaignPlan& plan, const std::filesystem::path& out_dir,
                const std::string& run_id, std::uint64_t seed,
                std::optional<int> stop_after = {}) {
    return run_campaign(plan, config, context(), RunOptions{run_id, out_dir, seed, stop_after});
  }
};

/// Every built-in cell for one backend, `per_cell` memes each.
inline CampaignPlan stub_plan(int per_cell, BackendKind backend = BackendKind::Stub) {
  return plan_full_campaign({std::string(to_string(backend))}, per_cell);
}

}  // namespace memeforge::testing
