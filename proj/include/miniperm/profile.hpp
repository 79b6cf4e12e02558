#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "miniperm/types.hpp"

namespace miniperm {

/// Mini programs from one vendor that silently share login data.
struct LoginGroup {
  std::string vendor;
  std::set<std::string> mini_programs;

  friend bool operator==(const LoginGroup&, const LoginGroup&) = default;
};

/// Reviewer-facing annotations. Overrides pin a matrix cell the observed
/// behavior cannot establish (a fixed issue, an untested host).
struct ProfileMetadata {
  std::string display_name;
  std::string company;
  std::string notes;
  // Scenario suite to run for this profile when it is not the one named
  // after key(), e.g. a patched twin reusing the original's suite.
  std::string suite;
  std::map<VulnCategory, CellStatus> matrix_overrides;

  friend bool operator==(const ProfileMetadata&, const ProfileMetadata&) = default;
};

/// One host app's permission policy on one platform. Immutable once loaded.
struct HostProfile {
  std::string host_id;
  Platform platform = Platform::Android;
  ScopeTable scope_table;
  std::vector<ApiSpec> registry;
  bool cache_cleared_on_exit = true;
  // Classes absent from the map have a settings entry.
  std::map<DataClass, bool> settings_page_present;
  bool grant_revocable = true;
  bool grant_deleted_with_mini_program = true;
  bool identity_data_retained = false;
  // A host-layer denial does not re-prompt until revoked or reset.
  bool host_denial_sticky = true;
  WebviewBridgeMode webview_bridge_mode = WebviewBridgeMode::EnforceBoth;
  std::set<std::string> vendor_trust_bypass;
  std::vector<LoginGroup> shared_login_groups;
  ClipboardPromptMode clipboard_prompt_mode = ClipboardPromptMode::NoPrompt;
  ProfileMetadata metadata;

  const ApiSpec* find_api(std::string_view name) const;
  /// Scope governing `api` at the host layer: the enforced scope, else the
  /// documented one, else the first scope mapped to its data class.
  std::optional<ScopeId> governing_scope(const ApiSpec& api) const;
  std::optional<ScopeId> first_scope_for(DataClass cls) const;
  bool settings_visible(DataClass cls) const;
  const LoginGroup* login_group_of(std::string_view mini_program) const;

  /// "wechat-android" style key.
  std::string key() const;
  /// metadata.suite when set, else key().
  std::string suite_key() const;

  friend bool operator==(const HostProfile&, const HostProfile&) = default;
};

struct OsEnvProfile {
  std::string name;
  ClipboardPromptMode clipboard_prompt_mode = ClipboardPromptMode::NoPrompt;
  std::string notes;

  friend bool operator==(const OsEnvProfile&, const OsEnvProfile&) = default;
};

/// A stand-alone API registry, as consumed by the scanner.
struct Registry {
  std::string host_id;
  ScopeTable scope_table;
  std::vector<ApiSpec> apis;

  const ApiSpec* find(std::string_view name) const;
};

Registry registry_of(const HostProfile& profile);

/// Throws Error(SchemaViolation | DanglingReference | DuplicateId).
void validate_profile(const HostProfile& profile);
void validate_registry(const std::vector<ApiSpec>& apis, const ScopeTable& scopes);

/// Parse errors report line and column; schema errors name the field path.
HostProfile parse_profile(std::string_view text, std::string_view source = "<profile>");
HostProfile load_profile(const std::filesystem::path& path);
nlohmann::ordered_json serialize_profile(const HostProfile& profile);

OsEnvProfile parse_env(std::string_view text, std::string_view source = "<env>");
OsEnvProfile load_env(const std::filesystem::path& path);
nlohmann::ordered_json serialize_env(const OsEnvProfile& env);

/// Accepts either a registry document or a full profile document.
Registry parse_registry(std::string_view text, std::string_view source = "<registry>");
Registry load_registry(const std::filesystem::path& path);

nlohmann::ordered_json api_to_json(const ApiSpec& api);
nlohmann::ordered_json literal_to_json(const Literal& lit);
Literal literal_from_json(const nlohmann::json& j, const std::string& where);

/// Profiles are unique by (host_id, platform) within a set.
void check_unique_profiles(const std::vector<HostProfile>& profiles);
void check_unique_envs(const std::vector<OsEnvProfile>& envs);

/// Profiles compiled into the library from fixtures/profiles, in host order.
const std::vector<HostProfile>& bundled_profiles();
const HostProfile& bundled_profile(std::string_view key);
/// Every profile fixture (bundled, patched twins, version variants).
const std::map<std::string, HostProfile>& fixture_profiles();
const HostProfile& fixture_profile(std::string_view key);
std::vector<ApiSpec> bundled_registry(std::string_view host_id);
const std::vector<OsEnvProfile>& bundled_envs();
const OsEnvProfile& bundled_env(std::string_view name);

/// Resolves a CLI argument: an existing file path, else a fixture key.
HostProfile resolve_profile(const std::string& path_or_key);
OsEnvProfile resolve_env(const std::string& path_or_name);

}  // namespace miniperm
