#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace miniperm {

/// Class of sensitive data an API can release. The OS layer grants
/// permissions per class; `None` marks APIs that release nothing sensitive.
enum class DataClass {
  Location,
  Contacts,
  Clipboard,
  Album,
  Camera,
  Microphone,
  Storage,
  Identity,
  None,
};

/// Classes backed by a runtime permission that the OS asks the user for.
/// Clipboard and account identity data have no OS-level grant.
bool is_os_gated(DataClass cls);

enum class Channel { Direct, Webview };
enum class Layer { Host, Os };
enum class UserChoice { Allow, Deny };
enum class GrantValue { Unset, Granted, Denied };
enum class Platform { Android, Ios };

enum class WebviewBridgeMode { EnforceBoth, HostLayerIgnored, BothLayersIgnored };

/// Ordered from weakest to strongest user feedback when a clipboard read
/// happens. The leaky blocking prompt asks, but the data is already out.
enum class ClipboardPromptMode { NoPrompt, Toast, BlockingPromptLeaky, BlockingPrompt };

std::string_view to_string(DataClass v);
std::string_view to_string(Channel v);
std::string_view to_string(Layer v);
std::string_view to_string(UserChoice v);
std::string_view to_string(GrantValue v);
std::string_view to_string(Platform v);
std::string_view to_string(WebviewBridgeMode v);
std::string_view to_string(ClipboardPromptMode v);

// Parsers accept any letter case and throw Error(InvalidArgument) otherwise.
DataClass parse_data_class(std::string_view s);
Channel parse_channel(std::string_view s);
Layer parse_layer(std::string_view s);
UserChoice parse_user_choice(std::string_view s);
GrantValue parse_grant_value(std::string_view s);
Platform parse_platform(std::string_view s);
WebviewBridgeMode parse_webview_bridge_mode(std::string_view s);
ClipboardPromptMode parse_clipboard_prompt_mode(std::string_view s);

/// Host-level authorization unit, e.g. "scope.userLocation".
class ScopeId {
 public:
  ScopeId() = default;
  explicit ScopeId(std::string value);

  static bool is_valid(std::string_view value);

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const ScopeId&, const ScopeId&) = default;
  friend bool operator==(const ScopeId&, const ScopeId&) = default;

 private:
  std::string value_;
};

/// A statically evident literal: boolean, number or string.
using Literal = std::variant<bool, double, std::string>;

std::string literal_to_display(const Literal& lit);

struct ParamLeakRule {
  std::string param_name;
  Literal trigger_value;
  bool requires_user_selection = false;
  DataClass released_class = DataClass::Location;

  friend bool operator==(const ParamLeakRule&, const ParamLeakRule&) = default;
};

struct ApiSpec {
  std::string name;
  DataClass data_class = DataClass::None;
  std::optional<ScopeId> documented_scope;
  std::optional<ScopeId> enforced_scope;
  bool interaction_gated = false;
  bool background_capable = false;
  std::vector<ParamLeakRule> param_leaks;
  std::set<Channel> channels{Channel::Direct};

  /// Checks the type-level invariants; throws Error(SchemaViolation).
  void validate() const;

  friend bool operator==(const ApiSpec&, const ApiSpec&) = default;
};

using ScopeTable = std::map<ScopeId, DataClass>;
using Args = std::map<std::string, Literal>;

/// The six vulnerability categories.
enum class VulnCategory {
  V1_CacheReuse,
  V2_PelApi,
  V3_StealthTransfer,
  V4_PermissionMgmt,
  V5_WebviewBypass,
  V6_EnvDivergence,
};

inline constexpr VulnCategory kAllCategories[] = {
    VulnCategory::V1_CacheReuse,     VulnCategory::V2_PelApi,
    VulnCategory::V3_StealthTransfer, VulnCategory::V4_PermissionMgmt,
    VulnCategory::V5_WebviewBypass,  VulnCategory::V6_EnvDivergence,
};

/// Matrix cell status for one host, category and platform.
enum class CellStatus { Vulnerable, Fixed, NotVulnerable, Unknown };

std::string_view to_string(VulnCategory v);
std::string_view short_name(VulnCategory v);  // "V1" .. "V6"
std::string_view to_string(CellStatus v);
/// Accepts "V2" as well as "V2_PelApi".
VulnCategory parse_category(std::string_view s);
CellStatus parse_cell_status(std::string_view s);

/// A user selection made inside the mini program's own UI.
struct Interaction {
  std::string selection;
};

}  // namespace miniperm
