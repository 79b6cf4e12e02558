#include "miniperm/profile.hpp"

#include <algorithm>
#include <cmath>

#include "json_util.hpp"
#include "miniperm/error.hpp"
#include "miniperm/fixtures.hpp"

namespace miniperm {

using detail::Fields;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

template <typename F>
auto parse_enum(const Fields& f, const std::string& field, const std::string& text, F parse) {
  try {
    return parse(text);
  } catch (const Error& e) {
    f.fail(field, e.what());
  }
}

ScopeId parse_scope(const Fields& f, const std::string& field, const json& v) {
  if (!v.is_string()) f.fail(field, "expected scope string");
  auto s = v.get<std::string>();
  if (!ScopeId::is_valid(s)) {
    f.fail(field, "invalid scope id '" + s + "' (needs a '.' and no whitespace)");
  }
  return ScopeId(s);
}

void check_schema_version(const Fields& f) {
  if (!f.has("schema_version")) return;
  const auto& v = f.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    f.fail("schema_version", "unsupported schema version " + v.dump());
  }
}

ScopeTable parse_scope_table(const Fields& f) {
  ScopeTable table;
  const auto& obj = f.object("scope_table");
  for (const auto& [name, cls] : obj.items()) {
    std::string field = f.path("scope_table") + "." + name;
    if (!ScopeId::is_valid(name)) f.fail(field, "invalid scope id '" + name + "'");
    if (!cls.is_string()) f.fail(field, "expected data class string");
    auto dc = parse_enum(f, field, cls.get<std::string>(), parse_data_class);
    if (dc == DataClass::None) f.fail(field, "a scope must map to a sensitive data class");
    table.emplace(ScopeId(name), dc);
  }
  return table;
}

ParamLeakRule parse_leak(const json& j, const std::string& path, std::string_view source) {
  Fields f(j, path, source);
  ParamLeakRule rule;
  rule.param_name = f.string("param_name");
  rule.trigger_value = literal_from_json(f.at("trigger_value"), f.path("trigger_value"));
  rule.requires_user_selection = f.boolean_or("requires_user_selection", false);
  rule.released_class = parse_enum(f, f.path("released_class"), f.string("released_class"),
                                   parse_data_class);
  return rule;
}

ApiSpec parse_api(const json& j, const std::string& path, std::string_view source) {
  Fields f(j, path, source);
  ApiSpec api;
  api.name = f.string("name");
  api.data_class =
      parse_enum(f, f.path("data_class"), f.string("data_class"), parse_data_class);
  if (f.has("documented_scope") && !f.at("documented_scope").is_null()) {
    api.documented_scope = parse_scope(f, f.path("documented_scope"), f.at("documented_scope"));
  }
  if (f.has("enforced_scope") && !f.at("enforced_scope").is_null()) {
    api.enforced_scope = parse_scope(f, f.path("enforced_scope"), f.at("enforced_scope"));
  }
  api.interaction_gated = f.boolean_or("interaction_gated", false);
  api.background_capable = f.boolean_or("background_capable", false);
  if (f.has("param_leaks")) {
    const auto& leaks = f.array("param_leaks");
    for (std::size_t i = 0; i < leaks.size(); ++i) {
      api.param_leaks.push_back(parse_leak(leaks[i], f.path("param_leaks", i), source));
    }
  }
  if (f.has("channels")) {
    api.channels.clear();
    const auto& chans = f.array("channels");
    for (std::size_t i = 0; i < chans.size(); ++i) {
      auto field = f.path("channels", i);
      if (!chans[i].is_string()) f.fail(field, "expected channel string");
      api.channels.insert(parse_enum(f, field, chans[i].get<std::string>(), parse_channel));
    }
  }
  try {
    api.validate();
  } catch (const Error& e) {
    f.fail(path, e.what());
  }
  return api;
}

std::vector<ApiSpec> parse_apis(const Fields& f, const char* key, std::string_view source) {
  std::vector<ApiSpec> apis;
  const auto& arr = f.array(key);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    apis.push_back(parse_api(arr[i], f.path(key, i), source));
  }
  return apis;
}

ordered_json scope_table_to_json(const ScopeTable& table) {
  ordered_json out = ordered_json::object();
  for (const auto& [scope, cls] : table) out[scope.str()] = to_string(cls);
  return out;
}

HostProfile profile_from_json(const json& root, std::string_view source) {
  Fields f(root, "", source);
  check_schema_version(f);
  HostProfile p;
  p.host_id = f.string("host_id");
  if (p.host_id.empty()) f.fail("host_id", "must not be empty");
  p.platform = parse_enum(f, "platform", f.string("platform"), parse_platform);
  p.scope_table = parse_scope_table(f);
  p.registry = parse_apis(f, "registry", source);
  p.cache_cleared_on_exit = f.boolean("cache_cleared_on_exit");
  if (f.has("settings_page_present")) {
    for (const auto& [cls, present] : f.object("settings_page_present").items()) {
      auto field = "settings_page_present." + cls;
      if (!present.is_boolean()) f.fail(field, "expected boolean");
      p.settings_page_present[parse_enum(f, field, cls, parse_data_class)] = present.get<bool>();
    }
  }
  p.grant_revocable = f.boolean("grant_revocable");
  p.grant_deleted_with_mini_program = f.boolean("grant_deleted_with_mini_program");
  p.identity_data_retained = f.boolean("identity_data_retained");
  p.host_denial_sticky = f.boolean_or("host_denial_sticky", true);
  p.webview_bridge_mode = parse_enum(f, "webview_bridge_mode", f.string("webview_bridge_mode"),
                                     parse_webview_bridge_mode);
  if (f.has("vendor_trust_bypass")) {
    const auto& arr = f.array("vendor_trust_bypass");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) f.fail(f.path("vendor_trust_bypass", i), "expected string");
      p.vendor_trust_bypass.insert(arr[i].get<std::string>());
    }
  }
  if (f.has("shared_login_groups")) {
    const auto& arr = f.array("shared_login_groups");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      Fields g(arr[i], f.path("shared_login_groups", i), source);
      LoginGroup group;
      group.vendor = g.string("vendor");
      const auto& members = g.array("mini_programs");
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (!members[k].is_string()) g.fail(g.path("mini_programs", k), "expected string");
        group.mini_programs.insert(members[k].get<std::string>());
      }
      p.shared_login_groups.push_back(std::move(group));
    }
  }
  p.clipboard_prompt_mode = parse_enum(f, "clipboard_prompt_mode",
                                       f.string("clipboard_prompt_mode"),
                                       parse_clipboard_prompt_mode);
  if (f.has("metadata")) {
    Fields m(f.object("metadata"), "metadata", source);
    p.metadata.display_name = m.string_or("display_name", "");
    p.metadata.company = m.string_or("company", "");
    p.metadata.notes = m.string_or("notes", "");
    p.metadata.suite = m.string_or("suite", "");
    if (m.has("matrix_overrides")) {
      for (const auto& [cat, status] : m.object("matrix_overrides").items()) {
        auto field = "metadata.matrix_overrides." + cat;
        if (!status.is_string()) m.fail(field, "expected status string");
        p.metadata.matrix_overrides[parse_enum(m, field, cat, parse_category)] =
            parse_enum(m, field, status.get<std::string>(), parse_cell_status);
      }
    }
  }
  try {
    validate_profile(p);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(source) + ": " + e.what());
  }
  return p;
}

}  // namespace

const ApiSpec* HostProfile::find_api(std::string_view name) const {
  auto it = std::find_if(registry.begin(), registry.end(),
                         [&](const ApiSpec& a) { return a.name == name; });
  return it == registry.end() ? nullptr : &*it;
}

std::optional<ScopeId> HostProfile::governing_scope(const ApiSpec& api) const {
  if (api.enforced_scope) return api.enforced_scope;
  if (api.documented_scope) return api.documented_scope;
  return first_scope_for(api.data_class);
}

std::optional<ScopeId> HostProfile::first_scope_for(DataClass cls) const {
  for (const auto& [scope, c] : scope_table) {
    if (c == cls) return scope;
  }
  return std::nullopt;
}

bool HostProfile::settings_visible(DataClass cls) const {
  auto it = settings_page_present.find(cls);
  return it == settings_page_present.end() || it->second;
}

const LoginGroup* HostProfile::login_group_of(std::string_view mini_program) const {
  for (const auto& g : shared_login_groups) {
    if (g.mini_programs.count(std::string(mini_program))) return &g;
  }
  return nullptr;
}

std::string HostProfile::key() const { return host_id + "-" + std::string(to_string(platform)); }

std::string HostProfile::suite_key() const { return metadata.suite.empty() ? key() : metadata.suite; }

const ApiSpec* Registry::find(std::string_view name) const {
  auto it = std::find_if(apis.begin(), apis.end(),
                         [&](const ApiSpec& a) { return a.name == name; });
  return it == apis.end() ? nullptr : &*it;
}

Registry registry_of(const HostProfile& profile) {
  return Registry{profile.host_id, profile.scope_table, profile.registry};
}

void validate_registry(const std::vector<ApiSpec>& apis, const ScopeTable& scopes) {
  std::set<std::string> names;
  for (const auto& api : apis) {
    api.validate();
    if (!names.insert(api.name).second) {
      throw Error(ErrorCode::DuplicateId, "api '" + api.name + "' registered twice");
    }
    for (const auto* scope : {&api.documented_scope, &api.enforced_scope}) {
      if (*scope && !scopes.count(**scope)) {
        throw Error(ErrorCode::DanglingReference,
                    "api '" + api.name + "' references scope '" + (*scope)->str() +
                        "' missing from scope_table");
      }
    }
  }
}

void validate_profile(const HostProfile& profile) {
  if (profile.host_id.empty()) {
    throw Error(ErrorCode::SchemaViolation, "host_id must not be empty");
  }
  for (const auto& [scope, cls] : profile.scope_table) {
    if (!ScopeId::is_valid(scope.str()) || cls == DataClass::None) {
      throw Error(ErrorCode::SchemaViolation, "bad scope_table entry '" + scope.str() + "'");
    }
  }
  validate_registry(profile.registry, profile.scope_table);
  std::set<std::string> grouped;
  for (const auto& g : profile.shared_login_groups) {
    for (const auto& mp : g.mini_programs) {
      if (!grouped.insert(mp).second) {
        throw Error(ErrorCode::DuplicateId,
                    "mini program '" + mp + "' listed in two shared login groups");
      }
    }
  }
}

HostProfile parse_profile(std::string_view text, std::string_view source) {
  return profile_from_json(detail::parse_json(text, source), source);
}

HostProfile load_profile(const std::filesystem::path& path) {
  return parse_profile(detail::read_file(path), path.string());
}

ordered_json literal_to_json(const Literal& lit) {
  if (const auto* b = std::get_if<bool>(&lit)) return *b;
  if (const auto* d = std::get_if<double>(&lit)) {
    double whole = 0;
    if (std::modf(*d, &whole) == 0.0 && std::abs(*d) < 9.0e15) {
      return static_cast<long long>(*d);
    }
    return *d;
  }
  return std::get<std::string>(lit);
}

Literal literal_from_json(const json& j, const std::string& where) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::SchemaViolation,
              "field '" + where + "': expected boolean, number or string literal");
}

ordered_json api_to_json(const ApiSpec& api) {
  ordered_json j;
  j["name"] = api.name;
  j["data_class"] = to_string(api.data_class);
  j["documented_scope"] = api.documented_scope ? ordered_json(api.documented_scope->str())
                                               : ordered_json(nullptr);
  j["enforced_scope"] =
      api.enforced_scope ? ordered_json(api.enforced_scope->str()) : ordered_json(nullptr);
  j["interaction_gated"] = api.interaction_gated;
  j["background_capable"] = api.background_capable;
  ordered_json leaks = ordered_json::array();
  for (const auto& rule : api.param_leaks) {
    ordered_json r;
    r["param_name"] = rule.param_name;
    r["trigger_value"] = literal_to_json(rule.trigger_value);
    r["requires_user_selection"] = rule.requires_user_selection;
    r["released_class"] = to_string(rule.released_class);
    leaks.push_back(std::move(r));
  }
  j["param_leaks"] = std::move(leaks);
  ordered_json chans = ordered_json::array();
  for (auto c : api.channels) chans.push_back(to_string(c));
  j["channels"] = std::move(chans);
  return j;
}

ordered_json serialize_profile(const HostProfile& p) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["host_id"] = p.host_id;
  j["platform"] = to_string(p.platform);
  j["scope_table"] = scope_table_to_json(p.scope_table);
  ordered_json reg = ordered_json::array();
  for (const auto& api : p.registry) reg.push_back(api_to_json(api));
  j["registry"] = std::move(reg);
  j["cache_cleared_on_exit"] = p.cache_cleared_on_exit;
  ordered_json settings = ordered_json::object();
  for (const auto& [cls, present] : p.settings_page_present) settings[to_string(cls)] = present;
  j["settings_page_present"] = std::move(settings);
  j["grant_revocable"] = p.grant_revocable;
  j["grant_deleted_with_mini_program"] = p.grant_deleted_with_mini_program;
  j["identity_data_retained"] = p.identity_data_retained;
  j["host_denial_sticky"] = p.host_denial_sticky;
  j["webview_bridge_mode"] = to_string(p.webview_bridge_mode);
  j["vendor_trust_bypass"] = p.vendor_trust_bypass;
  ordered_json groups = ordered_json::array();
  for (const auto& g : p.shared_login_groups) {
    ordered_json gj;
    gj["vendor"] = g.vendor;
    gj["mini_programs"] = g.mini_programs;
    groups.push_back(std::move(gj));
  }
  j["shared_login_groups"] = std::move(groups);
  j["clipboard_prompt_mode"] = to_string(p.clipboard_prompt_mode);
  ordered_json meta;
  meta["display_name"] = p.metadata.display_name;
  meta["company"] = p.metadata.company;
  meta["notes"] = p.metadata.notes;
  if (!p.metadata.suite.empty()) meta["suite"] = p.metadata.suite;
  ordered_json overrides = ordered_json::object();
  for (const auto& [cat, status] : p.metadata.matrix_overrides) {
    overrides[std::string(short_name(cat))] = to_string(status);
  }
  meta["matrix_overrides"] = std::move(overrides);
  j["metadata"] = std::move(meta);
  return j;
}

OsEnvProfile parse_env(std::string_view text, std::string_view source) {
  auto root = detail::parse_json(text, source);
  Fields f(root, "", source);
  check_schema_version(f);
  OsEnvProfile env;
  env.name = f.string("name");
  if (env.name.empty()) f.fail("name", "must not be empty");
  env.clipboard_prompt_mode = parse_enum(f, "clipboard_prompt_mode",
                                         f.string("clipboard_prompt_mode"),
                                         parse_clipboard_prompt_mode);
  env.notes = f.string_or("notes", "");
  return env;
}

OsEnvProfile load_env(const std::filesystem::path& path) {
  return parse_env(detail::read_file(path), path.string());
}

ordered_json serialize_env(const OsEnvProfile& env) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = env.name;
  j["clipboard_prompt_mode"] = to_string(env.clipboard_prompt_mode);
  j["notes"] = env.notes;
  return j;
}

Registry parse_registry(std::string_view text, std::string_view source) {
  auto root = detail::parse_json(text, source);
  Fields f(root, "", source);
  if (f.has("registry")) {
    return registry_of(profile_from_json(root, source));
  }
  check_schema_version(f);
  Registry reg;
  reg.host_id = f.string_or("host_id", "");
  reg.scope_table = parse_scope_table(f);
  reg.apis = parse_apis(f, "apis", source);
  try {
    validate_registry(reg.apis, reg.scope_table);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(source) + ": " + e.what());
  }
  return reg;
}

Registry load_registry(const std::filesystem::path& path) {
  return parse_registry(detail::read_file(path), path.string());
}

void check_unique_profiles(const std::vector<HostProfile>& profiles) {
  std::set<std::string> keys;
  for (const auto& p : profiles) {
    if (!keys.insert(p.key()).second) {
      throw Error(ErrorCode::DuplicateId, "profile '" + p.key() + "' loaded twice");
    }
  }
}

void check_unique_envs(const std::vector<OsEnvProfile>& envs) {
  std::set<std::string> names;
  for (const auto& e : envs) {
    if (!names.insert(e.name).second) {
      throw Error(ErrorCode::DuplicateId, "env '" + e.name + "' loaded twice");
    }
  }
}

namespace {

constexpr std::string_view kBundledOrder[] = {
    "wechat-android",  "wechat-ios",         "qq-android",     "alipay-android",
    "toutiao-android", "toutiao-lite-android", "tiktok-android", "baidu-android",
    "baidu-ios",       "quickapp-android",   "unionpay-android",
};

std::string stem_of(std::string_view rel) {
  auto slash = rel.rfind('/');
  auto name = rel.substr(slash == std::string_view::npos ? 0 : slash + 1);
  return std::string(name.substr(0, name.rfind(".json")));
}

}  // namespace

const std::map<std::string, HostProfile>& fixture_profiles() {
  static const std::map<std::string, HostProfile> profiles = [] {
    std::map<std::string, HostProfile> out;
    for (const auto& [rel, text] : embedded_fixtures()) {
      if (rel.rfind("profiles/", 0) != 0) continue;
      out.emplace(stem_of(rel), parse_profile(text, rel));
    }
    return out;
  }();
  return profiles;
}

const HostProfile& fixture_profile(std::string_view key) {
  const auto& all = fixture_profiles();
  auto it = all.find(std::string(key));
  if (it == all.end()) throw Error(ErrorCode::UnknownHost, "no profile fixture '" + std::string(key) + "'");
  return it->second;
}

const std::vector<HostProfile>& bundled_profiles() {
  static const std::vector<HostProfile> profiles = [] {
    std::vector<HostProfile> out;
    for (auto key : kBundledOrder) out.push_back(fixture_profile(key));
    check_unique_profiles(out);
    return out;
  }();
  return profiles;
}

const HostProfile& bundled_profile(std::string_view key) {
  for (const auto& p : bundled_profiles()) {
    if (p.key() == key) return p;
  }
  throw Error(ErrorCode::UnknownHost, "no bundled profile '" + std::string(key) + "'");
}

std::vector<ApiSpec> bundled_registry(std::string_view host_id) {
  for (const auto& p : bundled_profiles()) {
    if (p.host_id == host_id) return p.registry;
  }
  throw Error(ErrorCode::UnknownHost, "unknown host '" + std::string(host_id) + "'");
}

const std::vector<OsEnvProfile>& bundled_envs() {
  static const std::vector<OsEnvProfile> envs = [] {
    std::vector<OsEnvProfile> out;
    for (const auto& [rel, text] : embedded_fixtures()) {
      if (rel.rfind("envs/", 0) == 0) out.push_back(parse_env(text, rel));
    }
    check_unique_envs(out);
    return out;
  }();
  return envs;
}

const OsEnvProfile& bundled_env(std::string_view name) {
  for (const auto& e : bundled_envs()) {
    if (e.name == name) return e;
  }
  throw Error(ErrorCode::UnknownEnv, "unknown env '" + std::string(name) + "'");
}

HostProfile resolve_profile(const std::string& path_or_key) {
  if (std::filesystem::is_regular_file(path_or_key)) return load_profile(path_or_key);
  return fixture_profile(path_or_key);
}

OsEnvProfile resolve_env(const std::string& path_or_name) {
  if (std::filesystem::is_regular_file(path_or_name)) return load_env(path_or_name);
  return bundled_env(path_or_name);
}

}  // namespace miniperm
