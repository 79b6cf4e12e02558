#include "miniperm/world.hpp"

#include <algorithm>
#include <array>

#include "miniperm/error.hpp"

namespace miniperm {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 11> kEventNames{{
    {EventKind::PromptShown, "PromptShown"},
    {EventKind::PromptAnswered, "PromptAnswered"},
    {EventKind::ApiCalled, "ApiCalled"},
    {EventKind::DataReleased, "DataReleased"},
    {EventKind::FileCached, "FileCached"},
    {EventKind::FileReused, "FileReused"},
    {EventKind::Closed, "Closed"},
    {EventKind::Reopened, "Reopened"},
    {EventKind::Deleted, "Deleted"},
    {EventKind::GrantChanged, "GrantChanged"},
    {EventKind::SettingsOpened, "SettingsOpened"},
}};

constexpr std::array<std::pair<CasePath, std::string_view>, 6> kCaseNames{{
    {CasePath::BothAllow, "BothAllow"},
    {CasePath::HostRejectOsAllow, "HostRejectOsAllow"},
    {CasePath::OsReject, "OsReject"},
    {CasePath::NoScopeRequired, "NoScopeRequired"},
    {CasePath::ParamLeak, "ParamLeak"},
    {CasePath::WebviewBypass, "WebviewBypass"},
}};

constexpr std::array<std::pair<ReleaseRoute, std::string_view>, 8> kRouteNames{{
    {ReleaseRoute::Scope, "scope"},
    {ReleaseRoute::Interaction, "interaction"},
    {ReleaseRoute::Background, "background"},
    {ReleaseRoute::ParamLeak, "param_leak"},
    {ReleaseRoute::WebviewBridge, "webview_bridge"},
    {ReleaseRoute::VendorTrust, "vendor_trust"},
    {ReleaseRoute::SharedLogin, "shared_login"},
    {ReleaseRoute::Clipboard, "clipboard"},
}};

template <typename Table, typename E>
std::string_view lookup(const Table& table, E v) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

template <typename Table>
auto reverse_lookup(const Table& table, std::string_view s, std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::string_view kAuthorizeApi = "authorize";

int clipboard_rank(ClipboardPromptMode m) { return static_cast<int>(m); }

}  // namespace

std::string_view to_string(EventKind v) { return lookup(kEventNames, v); }
std::string_view to_string(CasePath v) { return lookup(kCaseNames, v); }
std::string_view to_string(ReleaseRoute v) { return lookup(kRouteNames, v); }
EventKind parse_event_kind(std::string_view s) { return reverse_lookup(kEventNames, s, "event kind"); }
CasePath parse_case_path(std::string_view s) { return reverse_lookup(kCaseNames, s, "case path"); }

ClipboardPromptMode effective_clipboard_mode(ClipboardPromptMode host, ClipboardPromptMode env) {
  return clipboard_rank(host) >= clipboard_rank(env) ? host : env;
}

struct World::Release {
  std::optional<DataClass> released;
  CasePath case_path = CasePath::NoScopeRequired;
  std::optional<ReleaseRoute> route;
  std::optional<std::string> fail_reason;
  bool user_selected = false;
};

World::World(std::shared_ptr<const HostProfile> profile) : profile_(std::move(profile)) {
  for (auto cls : {DataClass::Location, DataClass::Contacts, DataClass::Clipboard, DataClass::Album,
                   DataClass::Camera, DataClass::Microphone, DataClass::Storage,
                   DataClass::Identity}) {
    os_grants_.emplace(cls, OsGrant{cls, GrantValue::Unset});
  }
}

World World::create(std::shared_ptr<const HostProfile> profile,
                    const std::map<DataClass, GrantValue>& os_grants) {
  if (!profile) throw Error(ErrorCode::InvalidArgument, "world needs a host profile");
  World world(std::move(profile));
  for (const auto& [cls, value] : os_grants) {
    if (cls == DataClass::None) {
      throw Error(ErrorCode::InvalidArgument, "no OS permission exists for data class None");
    }
    world.os_grants_[cls].state = value;
  }
  return world;
}

World World::create(const HostProfile& profile, const std::map<DataClass, GrantValue>& os_grants) {
  return create(std::make_shared<const HostProfile>(profile), os_grants);
}

GrantValue World::os_grant(DataClass cls) const {
  auto it = os_grants_.find(cls);
  return it == os_grants_.end() ? GrantValue::Unset : it->second.state;
}

GrantState World::grant(std::string_view mini_program, const ScopeId& scope) const {
  auto it = grants_.find(GrantKey{std::string(mini_program), scope});
  return it == grants_.end() ? GrantState{} : it->second;
}

std::set<std::string> World::cached_paths(std::string_view mini_program) const {
  std::set<std::string> out;
  if (auto it = cache_.find(std::string(mini_program)); it != cache_.end()) {
    for (const auto& [path, session] : it->second) out.insert(path);
  }
  return out;
}

MiniProgram& World::existing(const std::string& id) {
  auto it = mini_programs_.find(id);
  if (it == mini_programs_.end()) {
    throw Error(ErrorCode::UnknownMiniProgram, "unknown mini program '" + id + "'");
  }
  return it->second;
}

MiniProgram& World::open_program(const std::string& id) {
  auto& mp = existing(id);
  if (mp.deleted) throw Error(ErrorCode::MiniProgramDeleted, "mini program '" + id + "' was deleted");
  if (!mp.open) throw Error(ErrorCode::MiniProgramNotOpen, "mini program '" + id + "' is closed");
  return mp;
}

TraceEvent& World::log(EventKind kind, EventPayload payload) {
  trace_.push_back(TraceEvent{next_seq_++, kind, std::move(payload)});
  return trace_.back();
}

std::uint64_t World::set_grant(const std::string& mini_program, const ScopeId& scope,
                               GrantValue value, DataClass cls) {
  EventPayload p;
  p.layer = Layer::Host;
  p.mini_program = mini_program;
  p.scope = scope;
  p.data_class = cls;
  p.grant = value;
  auto seq = log(EventKind::GrantChanged, std::move(p)).seq;
  auto& g = grants_[GrantKey{mini_program, scope}];
  g.state = value;
  g.recorded_at = value == GrantValue::Unset ? std::nullopt : std::optional(seq);
  g.visible_in_settings = value != GrantValue::Unset && profile_->settings_visible(cls);
  return seq;
}

bool World::os_allows(DataClass cls) const {
  if (!is_os_gated(cls)) return true;
  // Unset is not a held permission.
  return os_grant(cls) == GrantValue::Granted;
}

void World::launch(const std::string& id, const std::string& vendor) {
  if (id.empty()) throw Error(ErrorCode::InvalidArgument, "mini program id must not be empty");
  auto it = mini_programs_.find(id);
  if (it != mini_programs_.end() && !it->second.deleted) {
    throw Error(ErrorCode::LifecycleViolation, "mini program '" + id + "' is already installed");
  }
  if (it == mini_programs_.end()) {
    mini_programs_.emplace(id, MiniProgram{id, vendor, false, true, 0});
    return;
  }
  auto& mp = it->second;
  mp.vendor = vendor;
  mp.deleted = false;
  mp.open = true;
  ++mp.session;
}

CallOutcome World::finish(std::size_t first_event, std::uint64_t call_seq, CallOutcome out) {
  // Sequence numbers start at 1 and the trace is never truncated.
  trace_[call_seq - 1].payload.case_path = out.case_path;
  out.new_events.assign(trace_.begin() + static_cast<std::ptrdiff_t>(first_event), trace_.end());
  return out;
}

CallOutcome World::request_scope(const std::string& mini_program, const ScopeId& scope,
                                 UserChoice host_choice, UserChoice os_choice) {
  auto& mp = open_program(mini_program);
  auto table_it = profile_->scope_table.find(scope);
  if (table_it == profile_->scope_table.end()) {
    throw Error(ErrorCode::UnknownScope, "scope '" + scope.str() + "' is not in " + profile_->key());
  }
  const DataClass cls = table_it->second;
  const std::size_t first = trace_.size();

  EventPayload call;
  call.mini_program = mp.id;
  call.vendor = mp.vendor;
  call.api = std::string(kAuthorizeApi);
  call.scope = scope;
  call.data_class = cls;
  call.channel = Channel::Direct;
  const auto call_seq = log(EventKind::ApiCalled, std::move(call)).seq;

  CallOutcome out;
  auto prompt = [&](Layer layer, UserChoice choice) {
    EventPayload shown;
    shown.layer = layer;
    shown.mini_program = mp.id;
    shown.scope = scope;
    shown.data_class = cls;
    shown.blocking = true;
    shown.call = call_seq;
    log(EventKind::PromptShown, shown);
    EventPayload answered = shown;
    answered.blocking.reset();
    answered.user_choice = choice;
    log(EventKind::PromptAnswered, std::move(answered));
    out.prompts_shown.push_back(Prompt{layer, scope, cls, true});
  };
  auto os_flow = [&] {
    // Host layer has agreed; the OS asks only if it has never been answered.
    const bool needs_os = is_os_gated(cls) && os_grant(cls) == GrantValue::Unset;
    if (needs_os) {
      prompt(Layer::Os, os_choice);
      set_os_grant(cls, os_choice == UserChoice::Allow ? GrantValue::Granted : GrantValue::Denied);
      if (os_choice == UserChoice::Deny) {
        out.case_path = CasePath::OsReject;
        out.fail_reason = "OS permission denied for the host app";
        return;
      }
    }
    if (grant(mp.id, scope).state != GrantValue::Granted) {
      set_grant(mp.id, scope, GrantValue::Granted, cls);
    }
    out.case_path = CasePath::BothAllow;
  };

  const GrantValue current = grant(mp.id, scope).state;
  if (is_os_gated(cls) && os_grant(cls) == GrantValue::Denied) {
    out.case_path = CasePath::OsReject;
    out.fail_reason = "OS permission denied for the host app";
  } else if (current == GrantValue::Granted) {
    os_flow();
  } else if (current == GrantValue::Denied && profile_->host_denial_sticky) {
    out.case_path = CasePath::HostRejectOsAllow;
    out.fail_reason = "scope previously denied by the user";
  } else {
    prompt(Layer::Host, host_choice);
    if (host_choice == UserChoice::Deny) {
      set_grant(mp.id, scope, GrantValue::Denied, cls);
      out.case_path = CasePath::HostRejectOsAllow;
      out.fail_reason = "user denied the scope";
    } else {
      os_flow();
    }
  }
  return finish(first, call_seq, std::move(out));
}

bool World::shared_login_available(const MiniProgram& mp, const ScopeId& scope) const {
  const auto* group = profile_->login_group_of(mp.id);
  if (group == nullptr) return false;
  for (const auto& peer : group->mini_programs) {
    if (peer == mp.id || !mini_programs_.count(peer)) continue;
    if (grant(peer, scope).state == GrantValue::Granted) return true;
    auto held = retained_.find(peer);
    if (held != retained_.end() && held->second.count(DataClass::Identity)) return true;
  }
  return false;
}

World::Release World::resolve_call(const MiniProgram& mp, const ApiSpec& api, const Args& args,
                                   Channel channel, bool interacted, GrantValue host) const {
  Release r;
  const DataClass cls = api.data_class;
  const bool host_ok = host == GrantValue::Granted;
  auto os_reject = [&r](const char* why) {
    r.case_path = CasePath::OsReject;
    r.fail_reason = why;
  };

  if (channel == Channel::Webview &&
      profile_->webview_bridge_mode != WebviewBridgeMode::EnforceBoth) {
    const bool os_checked = profile_->webview_bridge_mode == WebviewBridgeMode::HostLayerIgnored;
    if (os_checked && !os_allows(cls)) {
      os_reject("OS permission not held by the host app");
      return r;
    }
    if (cls != DataClass::None) {
      r.released = cls;
      r.route = ReleaseRoute::WebviewBridge;
    }
    r.case_path = host_ok && os_allows(cls) ? CasePath::BothAllow : CasePath::WebviewBypass;
    return r;
  }

  // A matching parameter rule wins over the scope check.
  for (const auto& rule : api.param_leaks) {
    auto arg = args.find(rule.param_name);
    if (arg == args.end() || arg->second != rule.trigger_value) continue;
    if (rule.requires_user_selection && !interacted) continue;
    if (!os_allows(rule.released_class)) {
      os_reject("OS permission not held by the host app");
      return r;
    }
    r.released = rule.released_class;
    r.route = ReleaseRoute::ParamLeak;
    r.case_path = CasePath::ParamLeak;
    r.user_selected = interacted;
    return r;
  }

  if (api.enforced_scope) {
    if (profile_->vendor_trust_bypass.count(mp.vendor) && !host_ok) {
      if (!os_allows(cls)) {
        os_reject("OS permission not held by the host app");
        return r;
      }
      r.released = cls;
      r.route = ReleaseRoute::VendorTrust;
      r.case_path = CasePath::HostRejectOsAllow;
      return r;
    }
    if (cls == DataClass::Identity && !host_ok && shared_login_available(mp, *api.enforced_scope)) {
      r.released = cls;
      r.route = ReleaseRoute::SharedLogin;
      r.case_path = CasePath::HostRejectOsAllow;
      return r;
    }
    if (is_os_gated(cls) && os_grant(cls) == GrantValue::Denied) {
      os_reject("OS permission denied for the host app");
    } else if (!host_ok) {
      r.case_path = CasePath::HostRejectOsAllow;
      r.fail_reason = "scope '" + api.enforced_scope->str() + "' not granted";
    } else if (!os_allows(cls)) {
      os_reject("OS permission not held by the host app");
    } else {
      r.released = cls;
      r.route = ReleaseRoute::Scope;
      r.case_path = CasePath::BothAllow;
    }
    return r;
  }

  if (api.interaction_gated) {
    if (!os_allows(cls)) {
      os_reject("OS permission not held by the host app");
    } else if (!interacted) {
      r.fail_reason = "no user selection";
    } else {
      r.released = cls;
      r.route = ReleaseRoute::Interaction;
      r.user_selected = true;
    }
    return r;
  }

  if (api.background_capable && cls != DataClass::None) {
    if (!os_allows(cls)) {
      os_reject("OS permission not held by the host app");
      return r;
    }
    r.released = cls;
    r.route = ReleaseRoute::Background;
    r.case_path = host_ok ? CasePath::BothAllow : CasePath::HostRejectOsAllow;
    return r;
  }

  return r;
}

CallOutcome World::call_api(const std::string& mini_program, const std::string& api_name,
                            const Args& args, Channel channel,
                            const std::optional<Interaction>& interaction,
                            UserChoice prompt_answer) {
  auto& mp = open_program(mini_program);
  const ApiSpec* api = profile_->find_api(api_name);
  if (api == nullptr) {
    throw Error(ErrorCode::UnknownApi, "api '" + api_name + "' is not registered in " + profile_->key());
  }
  if (!api->channels.count(channel)) {
    throw Error(ErrorCode::ChannelUnsupported,
                "api '" + api_name + "' is not reachable over " + std::string(to_string(channel)));
  }
  if (api->data_class == DataClass::Clipboard) {
    return clipboard_read(mp, *api, default_env_, prompt_answer);
  }

  const std::size_t first = trace_.size();
  const auto scope = profile_->governing_scope(*api);
  const GrantValue host = scope ? grant(mp.id, *scope).state : GrantValue::Unset;

  EventPayload call;
  call.mini_program = mp.id;
  call.vendor = mp.vendor;
  call.api = api->name;
  call.scope = scope;
  call.data_class = api->data_class;
  call.channel = channel;
  const auto call_seq = log(EventKind::ApiCalled, std::move(call)).seq;

  Release r = resolve_call(mp, *api, args, channel, interaction.has_value(), host);
  CallOutcome out;
  out.case_path = r.case_path;
  out.fail_reason = r.fail_reason;
  if (r.released) {
    EventPayload rel;
    rel.mini_program = mp.id;
    rel.vendor = mp.vendor;
    rel.api = api->name;
    rel.scope = scope;
    rel.data_class = *r.released;
    rel.channel = channel;
    rel.host_grant = host;
    if (is_os_gated(*r.released)) rel.os_grant = os_grant(*r.released);
    rel.route = r.route;
    rel.user_selected = r.user_selected;
    rel.call = call_seq;
    log(EventKind::DataReleased, std::move(rel));
    out.released = r.released;
    if (*r.released == DataClass::Identity) retained_[mp.id].insert(DataClass::Identity);
  }
  return finish(first, call_seq, std::move(out));
}

CallOutcome World::clipboard_read(MiniProgram& mp, const ApiSpec& api, const OsEnvProfile& env,
                                  UserChoice answer) {
  const std::size_t first = trace_.size();
  const auto mode = effective_clipboard_mode(profile_->clipboard_prompt_mode,
                                             env.clipboard_prompt_mode);
  // The OS notice takes precedence when it is at least as strong as the host's.
  const Layer source = clipboard_rank(env.clipboard_prompt_mode) >=
                               clipboard_rank(profile_->clipboard_prompt_mode)
                           ? Layer::Os
                           : Layer::Host;

  EventPayload call;
  call.mini_program = mp.id;
  call.vendor = mp.vendor;
  call.api = api.name;
  call.data_class = DataClass::Clipboard;
  call.channel = Channel::Direct;
  call.env = env.name;
  const auto call_seq = log(EventKind::ApiCalled, std::move(call)).seq;

  CallOutcome out;
  auto release = [&] {
    EventPayload rel;
    rel.mini_program = mp.id;
    rel.vendor = mp.vendor;
    rel.api = api.name;
    rel.data_class = DataClass::Clipboard;
    rel.channel = Channel::Direct;
    rel.route = ReleaseRoute::Clipboard;
    rel.user_selected = false;
    rel.call = call_seq;
    rel.env = env.name;
    log(EventKind::DataReleased, std::move(rel));
    out.released = DataClass::Clipboard;
  };
  auto show = [&](bool blocking) {
    EventPayload p;
    p.layer = source;
    p.mini_program = mp.id;
    p.api = api.name;
    p.data_class = DataClass::Clipboard;
    p.blocking = blocking;
    p.call = call_seq;
    p.env = env.name;
    log(EventKind::PromptShown, std::move(p));
    out.prompts_shown.push_back(Prompt{source, std::nullopt, DataClass::Clipboard, blocking});
  };
  auto answered = [&] {
    EventPayload p;
    p.layer = source;
    p.mini_program = mp.id;
    p.api = api.name;
    p.data_class = DataClass::Clipboard;
    p.user_choice = answer;
    p.call = call_seq;
    p.env = env.name;
    log(EventKind::PromptAnswered, std::move(p));
  };

  switch (mode) {
    case ClipboardPromptMode::NoPrompt:
      release();
      break;
    case ClipboardPromptMode::Toast:
      release();
      show(false);
      break;
    case ClipboardPromptMode::BlockingPrompt:
      show(true);
      answered();
      if (answer == UserChoice::Allow) {
        release();
      } else {
        out.fail_reason = "user refused clipboard access";
      }
      break;
    case ClipboardPromptMode::BlockingPromptLeaky:
      show(true);
      release();
      answered();
      break;
  }
  out.case_path = CasePath::NoScopeRequired;
  return finish(first, call_seq, std::move(out));
}

CallOutcome World::read_clipboard(const std::string& mini_program, const OsEnvProfile& env,
                                  UserChoice answer, std::optional<std::string> api_name) {
  auto& mp = open_program(mini_program);
  const ApiSpec* api = nullptr;
  if (api_name) {
    api = profile_->find_api(*api_name);
    if (api != nullptr && api->data_class != DataClass::Clipboard) api = nullptr;
  } else {
    for (const auto& a : profile_->registry) {
      if (a.data_class == DataClass::Clipboard) {
        api = &a;
        break;
      }
    }
  }
  if (api == nullptr) {
    throw Error(ErrorCode::UnknownApi, "no clipboard API registered in " + profile_->key());
  }
  return clipboard_read(mp, *api, env, answer);
}

void World::revoke_scope(const std::string& mini_program, const ScopeId& scope) {
  existing(mini_program);
  auto table_it = profile_->scope_table.find(scope);
  if (table_it == profile_->scope_table.end()) {
    throw Error(ErrorCode::UnknownScope, "scope '" + scope.str() + "' is not in " + profile_->key());
  }
  auto g = grants_.find(GrantKey{mini_program, scope});
  if (g == grants_.end() || g->second.state == GrantValue::Unset) {
    throw Error(ErrorCode::NoSuchGrant,
                "no recorded grant of '" + scope.str() + "' for '" + mini_program + "'");
  }
  const DataClass cls = table_it->second;
  if (!profile_->settings_visible(cls)) {
    throw Error(ErrorCode::SettingsUnavailable,
                profile_->key() + " has no settings entry for " + std::string(to_string(cls)));
  }
  EventPayload opened;
  opened.layer = Layer::Host;
  opened.mini_program = mini_program;
  opened.scope = scope;
  opened.data_class = cls;
  log(EventKind::SettingsOpened, std::move(opened));
  if (!profile_->grant_revocable) {
    throw Error(ErrorCode::RevocationIneffective,
                "revoking '" + scope.str() + "' has no effect in " + profile_->key());
  }
  set_grant(mini_program, scope, GrantValue::Denied, cls);
}

void World::delete_mini_program(const std::string& id) {
  auto& mp = existing(id);
  if (mp.deleted) throw Error(ErrorCode::AlreadyDeleted, "mini program '" + id + "' already deleted");
  mp.deleted = true;
  mp.open = false;
  if (profile_->grant_deleted_with_mini_program) {
    for (auto it = grants_.begin(); it != grants_.end();) {
      it = it->first.first == id ? grants_.erase(it) : std::next(it);
    }
  }
  EventPayload p;
  p.mini_program = id;
  p.vendor = mp.vendor;
  if (profile_->identity_data_retained) {
    if (auto it = retained_.find(id); it != retained_.end()) {
      p.retained.assign(it->second.begin(), it->second.end());
    }
  } else {
    retained_.erase(id);
  }
  cache_.erase(id);
  log(EventKind::Deleted, std::move(p));
}

void World::close_mini_program(const std::string& id) {
  auto& mp = existing(id);
  if (mp.deleted || !mp.open) {
    throw Error(ErrorCode::LifecycleViolation, "mini program '" + id + "' is not open");
  }
  mp.open = false;
  if (profile_->cache_cleared_on_exit) cache_.erase(id);
  EventPayload p;
  p.mini_program = id;
  p.vendor = mp.vendor;
  log(EventKind::Closed, std::move(p));
}

void World::reopen_mini_program(const std::string& id) {
  auto& mp = existing(id);
  if (mp.deleted) {
    throw Error(ErrorCode::LifecycleViolation, "mini program '" + id + "' was deleted");
  }
  if (mp.open) throw Error(ErrorCode::LifecycleViolation, "mini program '" + id + "' is already open");
  mp.open = true;
  ++mp.session;
  EventPayload p;
  p.mini_program = id;
  p.vendor = mp.vendor;
  log(EventKind::Reopened, std::move(p));
}

void World::switch_account() {
  ++account_epoch_;
  std::vector<GrantKey> held;
  for (const auto& [key, state] : grants_) {
    if (state.state != GrantValue::Unset) held.push_back(key);
  }
  for (const auto& key : held) {
    set_grant(key.first, key.second, GrantValue::Unset, profile_->scope_table.at(key.second));
  }
}

void World::set_os_grant(DataClass cls, GrantValue value) {
  if (cls == DataClass::None) {
    throw Error(ErrorCode::InvalidArgument, "no OS permission exists for data class None");
  }
  os_grants_[cls].state = value;
  EventPayload p;
  p.layer = Layer::Os;
  p.data_class = cls;
  p.grant = value;
  log(EventKind::GrantChanged, std::move(p));
}

void World::cache_file(const std::string& mini_program, const std::string& path) {
  auto& mp = open_program(mini_program);
  cache_[mp.id][path] = mp.session;
  EventPayload p;
  p.mini_program = mp.id;
  p.vendor = mp.vendor;
  p.path = path;
  log(EventKind::FileCached, std::move(p));
}

bool World::access_file(const std::string& mini_program, const std::string& path) {
  auto& mp = open_program(mini_program);
  auto files = cache_.find(mp.id);
  if (files == cache_.end()) return false;
  auto it = files->second.find(path);
  if (it == files->second.end()) return false;
  if (it->second < mp.session) {
    EventPayload p;
    p.mini_program = mp.id;
    p.vendor = mp.vendor;
    p.path = path;
    log(EventKind::FileReused, std::move(p));
  }
  return true;
}

}  // namespace miniperm
