#pragma once

#include <set>
#include <vector>

#include "miniperm/finding.hpp"
#include "miniperm/profile.hpp"
#include "miniperm/scenario.hpp"
#include "miniperm/world.hpp"

namespace miniperm {

// Detectors are pure: they read a profile, registry, trace or world and never
// change simulation state.

/// V1: a file cached before a close is read again after the reopen.
std::vector<Finding> detect_cache_reuse(const Trace& trace, const HostProfile& profile);

/// V2 sub-modes for a single API, in sub-mode order. Empty when compliant.
std::vector<SubMode> classify_pel_api(const ApiSpec& api, const ScopeTable& scope_table);

/// V2, static. `host_id` and `platform` only label the findings.
std::vector<Finding> detect_pel_api(const std::vector<ApiSpec>& registry,
                                    const ScopeTable& scope_table,
                                    const std::string& host_id = "",
                                    Platform platform = Platform::Android);
std::vector<Finding> detect_pel_api(const HostProfile& profile);

/// V3: releases to trusted vendors without a host prompt (Vertical) and
/// identity data shown through a shared login without a grant (Horizontal).
std::vector<Finding> detect_stealth_transfer(const Trace& trace, const HostProfile& profile);

/// V4: grants hidden from settings, surviving deletion, or retained data.
std::vector<Finding> detect_mgmt_issues(const World& world, const HostProfile& profile);

/// V5: webview-bridge releases that skipped the OS or host layer. A profile
/// whose bridge enforces both layers yields nothing.
std::vector<Finding> detect_webview_bypass(const Trace& trace, const HostProfile& profile);

/// V6: runs `scenario` once per env and compares clipboard feedback pairwise.
/// Throws Error(InvalidArgument) with fewer than two envs.
std::vector<Finding> detect_env_divergence(const Scenario& scenario,
                                           const std::vector<OsEnvProfile>& envs,
                                           const HostProfile& profile);

/// Categories a scenario exercises: its declared `covers` plus the ones its
/// steps can trigger.
std::set<VulnCategory> scenario_coverage(const Scenario& scenario, std::size_t env_count);

struct RunAllResult {
  std::vector<Finding> findings;
  MatrixRow row;
};

/// Runs every detector over every scenario. `registry` replaces the profile's
/// own registry. `envs` is the divergence env set; when empty each scenario's
/// own `envs` list is used. Static V2 findings are always reported, but a
/// matrix cell stays Unknown unless some scenario covers its category.
RunAllResult run_all(const HostProfile& profile, const std::vector<ApiSpec>& registry,
                     const std::vector<Scenario>& scenarios,
                     const std::vector<OsEnvProfile>& envs = {});
RunAllResult run_all(const HostProfile& profile, const std::vector<Scenario>& scenarios,
                     const std::vector<OsEnvProfile>& envs = {});

}  // namespace miniperm
