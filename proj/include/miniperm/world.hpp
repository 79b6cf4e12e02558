#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "miniperm/profile.hpp"
#include "miniperm/types.hpp"

namespace miniperm {

enum class EventKind {
  PromptShown,
  PromptAnswered,
  ApiCalled,
  DataReleased,
  FileCached,
  FileReused,
  Closed,
  Reopened,
  Deleted,
  GrantChanged,
  SettingsOpened,
};

/// How a call resolved. The first three are the ordinary two-layer cases;
/// the rest are paths that bypass one or both layers.
enum class CasePath {
  BothAllow,
  HostRejectOsAllow,
  OsReject,
  NoScopeRequired,
  ParamLeak,
  WebviewBypass,
};

/// The rule that let data out on a DataReleased event.
enum class ReleaseRoute {
  Scope,
  Interaction,
  Background,
  ParamLeak,
  WebviewBridge,
  VendorTrust,
  SharedLogin,
  Clipboard,
};

std::string_view to_string(EventKind v);
std::string_view to_string(CasePath v);
std::string_view to_string(ReleaseRoute v);
EventKind parse_event_kind(std::string_view s);
CasePath parse_case_path(std::string_view s);

/// Kind-specific fields; unused ones stay empty and are omitted from JSON.
struct EventPayload {
  std::optional<Layer> layer;
  std::string mini_program;
  std::string vendor;
  std::string api;
  std::optional<ScopeId> scope;
  std::optional<DataClass> data_class;
  std::optional<Channel> channel;
  std::optional<UserChoice> user_choice;
  std::optional<GrantValue> grant;       // new value on GrantChanged
  std::optional<GrantValue> host_grant;  // snapshot at release time
  std::optional<GrantValue> os_grant;    // snapshot at release time
  std::optional<CasePath> case_path;     // filled on ApiCalled once resolved
  std::optional<ReleaseRoute> route;
  std::optional<bool> blocking;       // PromptShown
  std::optional<bool> user_selected;  // DataReleased through an explicit selection
  std::optional<std::uint64_t> call;  // seq of the ApiCalled that caused this event
  std::string path;
  std::vector<DataClass> retained;  // Deleted: data the mini program keeps
  std::string env;

  friend bool operator==(const EventPayload&, const EventPayload&) = default;
};

struct TraceEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::ApiCalled;
  EventPayload payload;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

using Trace = std::vector<TraceEvent>;

struct GrantState {
  GrantValue state = GrantValue::Unset;
  std::optional<std::uint64_t> recorded_at;  // present iff state != Unset
  bool visible_in_settings = false;

  friend bool operator==(const GrantState&, const GrantState&) = default;
};

struct OsGrant {
  DataClass permission_class = DataClass::Location;
  GrantValue state = GrantValue::Unset;
};

struct MiniProgram {
  std::string id;
  std::string vendor;
  bool deleted = false;
  bool open = true;
  // Incremented on every reopen; cached files remember the session they came from.
  std::uint32_t session = 0;
};

struct Prompt {
  Layer layer = Layer::Host;
  std::optional<ScopeId> scope;
  DataClass data_class = DataClass::None;
  bool blocking = true;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct CallOutcome {
  std::optional<DataClass> released;
  CasePath case_path = CasePath::NoScopeRequired;
  std::vector<Prompt> prompts_shown;
  std::vector<TraceEvent> new_events;
  // Set when the call ends in the framework's fail callback.
  std::optional<std::string> fail_reason;
};

using GrantKey = std::pair<std::string, ScopeId>;

/// Simulation state for one host profile: OS grants to the host, host
/// grants to mini programs, lifecycle, cache and the event trace.
class World {
 public:
  /// Throws Error(InvalidArgument) for an OS grant on DataClass::None.
  static World create(std::shared_ptr<const HostProfile> profile,
                      const std::map<DataClass, GrantValue>& os_grants = {});
  static World create(const HostProfile& profile,
                      const std::map<DataClass, GrantValue>& os_grants = {});

  const HostProfile& profile() const { return *profile_; }
  const Trace& trace() const { return trace_; }
  std::uint64_t account_epoch() const { return account_epoch_; }
  const std::map<DataClass, OsGrant>& os_grants() const { return os_grants_; }
  const std::map<std::string, MiniProgram>& mini_programs() const { return mini_programs_; }
  const std::map<GrantKey, GrantState>& grants() const { return grants_; }
  const std::map<std::string, std::set<DataClass>>& retained_identity_data() const {
    return retained_;
  }

  GrantValue os_grant(DataClass cls) const;
  GrantState grant(std::string_view mini_program, const ScopeId& scope) const;
  std::set<std::string> cached_paths(std::string_view mini_program) const;

  /// Environment used when call_api reaches a clipboard API.
  void set_default_env(OsEnvProfile env) { default_env_ = std::move(env); }
  const OsEnvProfile& default_env() const { return default_env_; }

  /// Installs and opens a mini program; reinstalls one that was deleted.
  void launch(const std::string& id, const std::string& vendor);

  CallOutcome request_scope(const std::string& mini_program, const ScopeId& scope,
                            UserChoice host_choice, UserChoice os_choice);

  CallOutcome call_api(const std::string& mini_program, const std::string& api,
                       const Args& args = {}, Channel channel = Channel::Direct,
                       const std::optional<Interaction>& interaction = std::nullopt,
                       UserChoice prompt_answer = UserChoice::Allow);

  /// Throws NoSuchGrant, SettingsUnavailable or RevocationIneffective.
  void revoke_scope(const std::string& mini_program, const ScopeId& scope);

  void delete_mini_program(const std::string& id);
  void close_mini_program(const std::string& id);
  void reopen_mini_program(const std::string& id);
  void switch_account();

  CallOutcome read_clipboard(const std::string& mini_program, const OsEnvProfile& env,
                             UserChoice answer = UserChoice::Allow,
                             std::optional<std::string> api = std::nullopt);

  /// The user flips the OS permission for the host app.
  void set_os_grant(DataClass cls, GrantValue value);

  void cache_file(const std::string& mini_program, const std::string& path);
  /// True if the path is still cached; logs FileReused when it survived a reopen.
  bool access_file(const std::string& mini_program, const std::string& path);

 private:
  explicit World(std::shared_ptr<const HostProfile> profile);

  struct Release;

  MiniProgram& existing(const std::string& id);
  MiniProgram& open_program(const std::string& id);
  TraceEvent& log(EventKind kind, EventPayload payload);
  std::uint64_t set_grant(const std::string& mini_program, const ScopeId& scope,
                          GrantValue value, DataClass cls);
  bool os_allows(DataClass cls) const;
  bool shared_login_available(const MiniProgram& mp, const ScopeId& scope) const;
  Release resolve_call(const MiniProgram& mp, const ApiSpec& api, const Args& args,
                       Channel channel, bool interacted, GrantValue host) const;
  CallOutcome clipboard_read(MiniProgram& mp, const ApiSpec& api, const OsEnvProfile& env,
                             UserChoice answer);
  CallOutcome finish(std::size_t first_event, std::uint64_t call_seq, CallOutcome out);

  std::shared_ptr<const HostProfile> profile_;
  std::map<DataClass, OsGrant> os_grants_;
  std::map<std::string, MiniProgram> mini_programs_;
  std::map<GrantKey, GrantState> grants_;
  std::map<std::string, std::set<DataClass>> retained_;
  std::map<std::string, std::map<std::string, std::uint32_t>> cache_;
  Trace trace_;
  std::uint64_t account_epoch_ = 0;
  std::uint64_t next_seq_ = 1;
  OsEnvProfile default_env_{"host-default", ClipboardPromptMode::NoPrompt,
                            "no OS-level clipboard feedback"};
};

/// The clipboard feedback a user sees: the stronger of host and OS behavior.
ClipboardPromptMode effective_clipboard_mode(ClipboardPromptMode host, ClipboardPromptMode env);

}  // namespace miniperm
