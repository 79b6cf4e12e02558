#include "miniperm/types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <utility>

#include "miniperm/error.hpp"

namespace miniperm {

namespace {

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, std::string_view>, N>;

constexpr NameTable<DataClass, 9> kDataClassNames{{
    {DataClass::Location, "Location"},
    {DataClass::Contacts, "Contacts"},
    {DataClass::Clipboard, "Clipboard"},
    {DataClass::Album, "Album"},
    {DataClass::Camera, "Camera"},
    {DataClass::Microphone, "Microphone"},
    {DataClass::Storage, "Storage"},
    {DataClass::Identity, "Identity"},
    {DataClass::None, "None"},
}};

constexpr NameTable<Channel, 2> kChannelNames{{
    {Channel::Direct, "direct"},
    {Channel::Webview, "webview"},
}};

constexpr NameTable<Layer, 2> kLayerNames{{
    {Layer::Host, "host"},
    {Layer::Os, "os"},
}};

constexpr NameTable<UserChoice, 2> kChoiceNames{{
    {UserChoice::Allow, "allow"},
    {UserChoice::Deny, "deny"},
}};

constexpr NameTable<GrantValue, 3> kGrantNames{{
    {GrantValue::Unset, "Unset"},
    {GrantValue::Granted, "Granted"},
    {GrantValue::Denied, "Denied"},
}};

constexpr NameTable<Platform, 2> kPlatformNames{{
    {Platform::Android, "android"},
    {Platform::Ios, "ios"},
}};

constexpr NameTable<WebviewBridgeMode, 3> kBridgeNames{{
    {WebviewBridgeMode::EnforceBoth, "EnforceBoth"},
    {WebviewBridgeMode::HostLayerIgnored, "HostLayerIgnored"},
    {WebviewBridgeMode::BothLayersIgnored, "BothLayersIgnored"},
}};

constexpr NameTable<ClipboardPromptMode, 4> kClipboardNames{{
    {ClipboardPromptMode::NoPrompt, "NoPrompt"},
    {ClipboardPromptMode::Toast, "Toast"},
    {ClipboardPromptMode::BlockingPromptLeaky, "BlockingPromptLeaky"},
    {ClipboardPromptMode::BlockingPrompt, "BlockingPrompt"},
}};

constexpr NameTable<VulnCategory, 6> kCategoryNames{{
    {VulnCategory::V1_CacheReuse, "V1_CacheReuse"},
    {VulnCategory::V2_PelApi, "V2_PelApi"},
    {VulnCategory::V3_StealthTransfer, "V3_StealthTransfer"},
    {VulnCategory::V4_PermissionMgmt, "V4_PermissionMgmt"},
    {VulnCategory::V5_WebviewBypass, "V5_WebviewBypass"},
    {VulnCategory::V6_EnvDivergence, "V6_EnvDivergence"},
}};

constexpr NameTable<CellStatus, 4> kCellNames{{
    {CellStatus::Vulnerable, "Vulnerable"},
    {CellStatus::Fixed, "Fixed"},
    {CellStatus::NotVulnerable, "NotVulnerable"},
    {CellStatus::Unknown, "Unknown"},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

template <typename E, std::size_t N>
std::string_view name_of(const NameTable<E, N>& table, E v) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_from(const NameTable<E, N>& table, std::string_view s, std::string_view what) {
  for (const auto& [value, name] : table) {
    if (iequals(name, s)) return value;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

}  // namespace

bool is_os_gated(DataClass cls) {
  switch (cls) {
    case DataClass::Location:
    case DataClass::Contacts:
    case DataClass::Album:
    case DataClass::Camera:
    case DataClass::Microphone:
    case DataClass::Storage:
      return true;
    case DataClass::Clipboard:
    case DataClass::Identity:
    case DataClass::None:
      return false;
  }
  return false;
}

std::string_view to_string(DataClass v) { return name_of(kDataClassNames, v); }
std::string_view to_string(Channel v) { return name_of(kChannelNames, v); }
std::string_view to_string(Layer v) { return name_of(kLayerNames, v); }
std::string_view to_string(UserChoice v) { return name_of(kChoiceNames, v); }
std::string_view to_string(GrantValue v) { return name_of(kGrantNames, v); }
std::string_view to_string(Platform v) { return name_of(kPlatformNames, v); }
std::string_view to_string(WebviewBridgeMode v) { return name_of(kBridgeNames, v); }
std::string_view to_string(ClipboardPromptMode v) { return name_of(kClipboardNames, v); }

std::string_view to_string(VulnCategory v) { return name_of(kCategoryNames, v); }
std::string_view short_name(VulnCategory v) { return to_string(v).substr(0, 2); }
std::string_view to_string(CellStatus v) { return name_of(kCellNames, v); }

VulnCategory parse_category(std::string_view s) {
  for (const auto& [value, name] : kCategoryNames) {
    if (iequals(name, s) || iequals(name.substr(0, 2), s)) return value;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown category '" + std::string(s) + "'");
}

CellStatus parse_cell_status(std::string_view s) {
  return parse_from(kCellNames, s, "cell status");
}

DataClass parse_data_class(std::string_view s) {
  return parse_from(kDataClassNames, s, "data class");
}
Channel parse_channel(std::string_view s) { return parse_from(kChannelNames, s, "channel"); }
Layer parse_layer(std::string_view s) { return parse_from(kLayerNames, s, "layer"); }
UserChoice parse_user_choice(std::string_view s) {
  return parse_from(kChoiceNames, s, "user choice");
}
GrantValue parse_grant_value(std::string_view s) {
  return parse_from(kGrantNames, s, "grant state");
}
Platform parse_platform(std::string_view s) { return parse_from(kPlatformNames, s, "platform"); }
WebviewBridgeMode parse_webview_bridge_mode(std::string_view s) {
  return parse_from(kBridgeNames, s, "webview bridge mode");
}
ClipboardPromptMode parse_clipboard_prompt_mode(std::string_view s) {
  return parse_from(kClipboardNames, s, "clipboard prompt mode");
}

ScopeId::ScopeId(std::string value) : value_(std::move(value)) {
  if (!is_valid(value_)) {
    throw Error(ErrorCode::InvalidArgument, "invalid scope id '" + value_ + "'");
  }
}

bool ScopeId::is_valid(std::string_view value) {
  if (value.empty() || value.find('.') == std::string_view::npos) return false;
  return std::none_of(value.begin(), value.end(),
                      [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

std::string literal_to_display(const Literal& lit) {
  if (const auto* b = std::get_if<bool>(&lit)) return *b ? "true" : "false";
  if (const auto* d = std::get_if<double>(&lit)) {
    std::ostringstream os;
    os << *d;
    return os.str();
  }
  return "\"" + std::get<std::string>(lit) + "\"";
}

void ApiSpec::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorCode::SchemaViolation, "api '" + name + "': " + what);
  };
  if (name.empty()) throw Error(ErrorCode::SchemaViolation, "api name must not be empty");
  if (interaction_gated && background_capable) {
    fail("interaction_gated and background_capable are mutually exclusive");
  }
  if (data_class == DataClass::None &&
      (documented_scope || enforced_scope || !param_leaks.empty())) {
    fail("an API releasing no sensitive data cannot carry scopes or parameter leaks");
  }
  if (channels.empty()) fail("channels must not be empty");
  for (const auto& rule : param_leaks) {
    if (rule.param_name.empty()) fail("parameter leak rule without a parameter name");
    if (rule.released_class == DataClass::None) {
      fail("parameter leak on '" + rule.param_name + "' must release a sensitive class");
    }
  }
}

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownMiniProgram: return "UnknownMiniProgram";
    case ErrorCode::UnknownScope: return "UnknownScope";
    case ErrorCode::UnknownApi: return "UnknownApi";
    case ErrorCode::UnknownHost: return "UnknownHost";
    case ErrorCode::UnknownEnv: return "UnknownEnv";
    case ErrorCode::MiniProgramDeleted: return "MiniProgramDeleted";
    case ErrorCode::MiniProgramNotOpen: return "MiniProgramNotOpen";
    case ErrorCode::ChannelUnsupported: return "ChannelUnsupported";
    case ErrorCode::SettingsUnavailable: return "SettingsUnavailable";
    case ErrorCode::RevocationIneffective: return "RevocationIneffective";
    case ErrorCode::NoSuchGrant: return "NoSuchGrant";
    case ErrorCode::AlreadyDeleted: return "AlreadyDeleted";
    case ErrorCode::LifecycleViolation: return "LifecycleViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DanglingReference: return "DanglingReference";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

}  // namespace miniperm
