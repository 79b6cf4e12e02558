#include "miniperm/detectors.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "miniperm/error.hpp"

namespace miniperm {

namespace {

Finding base(VulnCategory cat, SubMode mode, const HostProfile& profile) {
  Finding f;
  f.category = cat;
  f.sub_mode = mode;
  f.host_id = profile.host_id;
  f.platform = profile.platform;
  return f;
}

std::string scope_text(const EventPayload& p) { return p.scope ? p.scope->str() : "-"; }

}  // namespace

std::vector<Finding> detect_cache_reuse(const Trace& trace, const HostProfile& profile) {
  struct Lifecycle {
    std::optional<std::uint64_t> closed;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> cycle;  // Closed, Reopened
  };
  std::map<std::string, Lifecycle> state;
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<Finding> out;
  for (const auto& e : trace) {
    const auto& mp = e.payload.mini_program;
    switch (e.kind) {
      case EventKind::Closed:
        state[mp].closed = e.seq;
        break;
      case EventKind::Reopened:
        if (auto& s = state[mp]; s.closed) s.cycle = std::make_pair(*s.closed, e.seq);
        break;
      case EventKind::Deleted:
        state.erase(mp);
        break;
      case EventKind::FileReused: {
        auto it = state.find(mp);
        if (it == state.end() || !it->second.cycle) break;
        if (!seen.insert({mp, e.payload.path}).second) break;
        auto f = base(VulnCategory::V1_CacheReuse, SubMode::None, profile);
        f.mini_program = mp;
        f.evidence_seqs = {it->second.cycle->first, it->second.cycle->second, e.seq};
        f.description = "cached file '" + e.payload.path + "' of '" + mp +
                        "' is still readable after the mini program was closed and reopened";
        out.push_back(std::move(f));
        break;
      }
      default:
        break;
    }
  }
  return out;
}

std::vector<SubMode> classify_pel_api(const ApiSpec& api, const ScopeTable& scope_table) {
  std::vector<SubMode> modes;
  if (!api.enforced_scope && api.background_capable && is_os_gated(api.data_class)) {
    const bool scope_exists = std::any_of(scope_table.begin(), scope_table.end(),
                                          [&](const auto& kv) { return kv.second == api.data_class; });
    modes.push_back(scope_exists ? SubMode::ForgottenScope : SubMode::QualificationIgnored);
  }
  if (!api.param_leaks.empty()) modes.push_back(SubMode::ParameterLeak);
  if (api.documented_scope && api.enforced_scope != api.documented_scope) {
    modes.push_back(SubMode::InvalidSetting);
  }
  std::sort(modes.begin(), modes.end());
  return modes;
}

std::vector<Finding> detect_pel_api(const std::vector<ApiSpec>& registry, const ScopeTable& scope_table,
                                    const std::string& host_id, Platform platform) {
  std::vector<Finding> out;
  for (const auto& api : registry) {
    for (auto mode : classify_pel_api(api, scope_table)) {
      Finding f;
      f.category = VulnCategory::V2_PelApi;
      f.sub_mode = mode;
      f.host_id = host_id;
      f.platform = platform;
      f.api = api.name;
      f.evidence_refs = {"registry:" + api.name};
      const std::string cls(to_string(api.data_class));
      switch (mode) {
        case SubMode::QualificationIgnored:
          f.description = api.name + " returns " + cls + " data and no scope exists for that class";
          break;
        case SubMode::ForgottenScope:
          f.description = api.name + " returns " + cls + " data without checking any scope";
          break;
        case SubMode::ParameterLeak: {
          const auto& rule = api.param_leaks.front();
          f.description = api.name + " releases " + std::string(to_string(rule.released_class)) +
                          " data when " + rule.param_name + "=" + literal_to_display(rule.trigger_value);
          break;
        }
        case SubMode::InvalidSetting:
          f.description = api.name + " documents " + api.documented_scope->str() + " but enforces " +
                          (api.enforced_scope ? api.enforced_scope->str() : std::string("no scope"));
          break;
        default:
          break;
      }
      out.push_back(std::move(f));
    }
  }
  sort_findings(out);
  return out;
}

std::vector<Finding> detect_pel_api(const HostProfile& profile) {
  return detect_pel_api(profile.registry, profile.scope_table, profile.host_id, profile.platform);
}

std::vector<Finding> detect_stealth_transfer(const Trace& trace, const HostProfile& profile) {
  std::vector<Finding> out;
  std::set<std::pair<std::string, ScopeId>> prompted;
  // Earliest event showing each mini program holds identity data.
  std::map<std::string, std::uint64_t> holders;
  std::set<std::pair<std::string, std::string>> seen_vertical;
  std::set<std::pair<std::string, std::string>> seen_horizontal;

  for (const auto& e : trace) {
    const auto& p = e.payload;
    if (e.kind == EventKind::PromptShown && p.layer == Layer::Host && p.scope) {
      prompted.insert({p.mini_program, *p.scope});
    }
    if (e.kind == EventKind::GrantChanged && p.layer == Layer::Host && p.grant == GrantValue::Granted &&
        p.data_class == DataClass::Identity) {
      holders.try_emplace(p.mini_program, e.seq);
    }
    if (e.kind != EventKind::DataReleased) continue;
    const bool selected = p.user_selected.value_or(false);

    if (!selected && p.scope && profile.vendor_trust_bypass.count(p.vendor) &&
        !prompted.count({p.mini_program, *p.scope}) &&
        seen_vertical.insert({p.mini_program, p.api}).second) {
      auto f = base(VulnCategory::V3_StealthTransfer, SubMode::Vertical, profile);
      f.api = p.api;
      f.mini_program = p.mini_program;
      if (p.call) f.evidence_seqs.push_back(*p.call);
      f.evidence_seqs.push_back(e.seq);
      f.description = "'" + p.mini_program + "' (vendor " + p.vendor + ") received " +
                      std::string(to_string(p.data_class.value_or(DataClass::None))) +
                      " data without a host prompt for " + scope_text(p);
      out.push_back(std::move(f));
    }

    if (p.data_class == DataClass::Identity) {
      const LoginGroup* group = profile.login_group_of(p.mini_program);
      if (!selected && group != nullptr && p.host_grant != GrantValue::Granted) {
        const std::pair<std::string, std::uint64_t>* holder = nullptr;
        std::pair<std::string, std::uint64_t> best;
        for (const auto& peer : group->mini_programs) {
          if (peer == p.mini_program) continue;
          auto h = holders.find(peer);
          if (h != holders.end() && (holder == nullptr || h->second < best.second)) {
            best = *h;
            holder = &best;
          }
        }
        if (holder != nullptr && seen_horizontal.insert({p.mini_program, p.api}).second) {
          auto f = base(VulnCategory::V3_StealthTransfer, SubMode::Horizontal, profile);
          f.api = p.api;
          f.mini_program = p.mini_program;
          f.evidence_seqs.push_back(holder->second);
          if (p.call) f.evidence_seqs.push_back(*p.call);
          f.evidence_seqs.push_back(e.seq);
          f.description = "'" + p.mini_program + "' shows login data held by '" + holder->first +
                          "' (" + group->vendor + " group) without its own grant";
          out.push_back(std::move(f));
        }
      }
      holders.try_emplace(p.mini_program, e.seq);
    }
  }
  return out;
}

std::vector<Finding> detect_mgmt_issues(const World& world, const HostProfile& profile) {
  std::vector<Finding> out;
  const Trace& trace = world.trace();

  for (const auto& [key, g] : world.grants()) {
    if (g.state != GrantValue::Granted) continue;
    auto cls_it = profile.scope_table.find(key.second);
    const DataClass cls = cls_it == profile.scope_table.end() ? DataClass::None : cls_it->second;
    if (g.visible_in_settings && profile.settings_visible(cls)) continue;
    auto f = base(VulnCategory::V4_PermissionMgmt, SubMode::SettingDisappears, profile);
    f.mini_program = key.first;
    if (g.recorded_at) f.evidence_seqs.push_back(*g.recorded_at);
    f.description = "granted " + key.second.str() + " (" + std::string(to_string(cls)) + ") of '" +
                    key.first + "' has no entry in the settings page";
    out.push_back(std::move(f));
  }

  std::set<std::string> reported_delete;
  std::set<std::string> reported_retained;
  for (const auto& e : trace) {
    if (e.kind != EventKind::Deleted) continue;
    const auto& mp = e.payload.mini_program;

    if (!reported_delete.count(mp)) {
      std::vector<std::uint64_t> survivors;
      std::vector<std::string> scopes;
      for (const auto& [key, g] : world.grants()) {
        if (key.first != mp || g.state == GrantValue::Unset || !g.recorded_at) continue;
        if (*g.recorded_at < e.seq) {
          survivors.push_back(*g.recorded_at);
          scopes.push_back(key.second.str());
        }
      }
      if (!survivors.empty()) {
        reported_delete.insert(mp);
        auto f = base(VulnCategory::V4_PermissionMgmt, SubMode::CannotDelete, profile);
        f.mini_program = mp;
        std::sort(survivors.begin(), survivors.end());
        f.evidence_seqs = survivors;
        f.evidence_seqs.push_back(e.seq);
        std::string list;
        for (const auto& s : scopes) list += (list.empty() ? "" : ", ") + s;
        f.description = "grants survive deletion of '" + mp + "': " + list;
        out.push_back(std::move(f));
      }
    }

    auto kept = world.retained_identity_data().find(mp);
    if (!e.payload.retained.empty() && kept != world.retained_identity_data().end() &&
        !kept->second.empty() && reported_retained.insert(mp).second) {
      auto f = base(VulnCategory::V4_PermissionMgmt, SubMode::IncompleteRemoval, profile);
      f.mini_program = mp;
      f.evidence_seqs = {e.seq};
      std::string list;
      for (auto c : kept->second) list += (list.empty() ? "" : ", ") + std::string(to_string(c));
      f.description = "'" + mp + "' keeps " + list + " data after deletion";
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<Finding> detect_webview_bypass(const Trace& trace, const HostProfile& profile) {
  std::vector<Finding> out;
  if (profile.webview_bridge_mode == WebviewBridgeMode::EnforceBoth) return out;
  std::set<std::tuple<std::string, std::string, SubMode>> seen;
  for (const auto& e : trace) {
    const auto& p = e.payload;
    if (e.kind != EventKind::DataReleased || p.channel != Channel::Webview ||
        p.route != ReleaseRoute::WebviewBridge) {
      continue;
    }
    SubMode mode;
    std::string why;
    if (p.os_grant && *p.os_grant != GrantValue::Granted) {
      mode = SubMode::BothLayersIgnored;
      why = "the OS grant is " + std::string(to_string(*p.os_grant));
    } else if (p.host_grant != GrantValue::Granted) {
      mode = SubMode::HostLayerIgnored;
      why = "the host grant for " + scope_text(p) + " is " +
            std::string(to_string(p.host_grant.value_or(GrantValue::Unset)));
    } else {
      continue;
    }
    if (!seen.insert({p.mini_program, p.api, mode}).second) continue;
    auto f = base(VulnCategory::V5_WebviewBypass, mode, profile);
    f.api = p.api;
    f.mini_program = p.mini_program;
    if (p.call) f.evidence_seqs.push_back(*p.call);
    f.evidence_seqs.push_back(e.seq);
    f.description = p.api + " released " + std::string(to_string(p.data_class.value_or(DataClass::None))) +
                    " data over the webview bridge although " + why;
    out.push_back(std::move(f));
  }
  return out;
}

namespace {

struct CallShape {
  bool prompt = false;  // blocking prompt shown
  bool notice = false;  // non-blocking notice shown
  bool released = false;
  bool release_before_answer = false;
  std::optional<UserChoice> answer;
  std::vector<std::uint64_t> seqs;

  std::string token() const {
    std::string t = prompt ? "prompt" : notice ? "notice" : "none";
    t += released ? (release_before_answer ? ":early-release" : ":release") : ":withheld";
    if (answer) t += ":" + std::string(to_string(*answer));
    return t;
  }

  std::string describe() const {
    if (!prompt && !notice) return released ? "released silently" : "withheld without a prompt";
    if (notice && !prompt) return "released with a non-blocking notice";
    if (!released) return "withheld after the prompt was denied";
    return release_before_answer ? "released before the prompt was answered"
                                 : "released after the prompt was answered";
  }

  bool flagged() const { return released && ((!prompt && !notice) || release_before_answer); }
};

struct ApiBehavior {
  std::vector<CallShape> calls;

  std::string signature() const {
    std::string s;
    for (const auto& c : calls) s += (s.empty() ? "" : ";") + c.token();
    return s;
  }
  std::vector<std::uint64_t> seqs() const {
    std::vector<std::uint64_t> out;
    for (const auto& c : calls) out.insert(out.end(), c.seqs.begin(), c.seqs.end());
    return out;
  }
};

std::map<std::string, ApiBehavior> clipboard_behavior(const Trace& trace) {
  std::map<std::string, ApiBehavior> out;
  std::map<std::uint64_t, std::pair<std::string, std::size_t>> calls;
  for (const auto& e : trace) {
    const auto& p = e.payload;
    if (p.data_class != DataClass::Clipboard) continue;
    if (e.kind == EventKind::ApiCalled) {
      auto& b = out[p.api];
      calls[e.seq] = {p.api, b.calls.size()};
      b.calls.emplace_back();
      b.calls.back().seqs.push_back(e.seq);
      continue;
    }
    if (!p.call) continue;
    auto it = calls.find(*p.call);
    if (it == calls.end()) continue;
    auto& c = out[it->second.first].calls[it->second.second];
    c.seqs.push_back(e.seq);
    if (e.kind == EventKind::PromptShown) {
      (p.blocking.value_or(true) ? c.prompt : c.notice) = true;
    } else if (e.kind == EventKind::PromptAnswered) {
      c.answer = p.user_choice;
    } else if (e.kind == EventKind::DataReleased) {
      c.released = true;
      if (c.prompt && !c.answer) c.release_before_answer = true;
    }
  }
  return out;
}

std::string summary(const ApiBehavior& b) {
  std::string s;
  for (const auto& c : b.calls) s += (s.empty() ? "" : "; ") + c.describe();
  return s.empty() ? "not called" : s;
}

bool flagged(const ApiBehavior& b) {
  return std::any_of(b.calls.begin(), b.calls.end(), [](const CallShape& c) { return c.flagged(); });
}

}  // namespace

std::vector<Finding> detect_env_divergence(const Scenario& scenario, const std::vector<OsEnvProfile>& envs,
                                           const HostProfile& profile) {
  if (envs.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "environment divergence needs at least two envs, got " +
                                                std::to_string(envs.size()));
  }
  std::vector<std::map<std::string, ApiBehavior>> behaviors;
  for (const auto& env : envs) {
    auto run = run_scenario(profile, scenario, &env);
    behaviors.push_back(clipboard_behavior(run.world.trace()));
  }
  std::set<std::string> apis;
  for (const auto& b : behaviors) {
    for (const auto& [api, _] : b) apis.insert(api);
  }

  std::vector<Finding> out;
  static const ApiBehavior kAbsent;
  for (const auto& api : apis) {
    for (std::size_t i = 0; i < envs.size(); ++i) {
      for (std::size_t j = i + 1; j < envs.size(); ++j) {
        auto lookup = [&](std::size_t k) -> const ApiBehavior& {
          auto it = behaviors[k].find(api);
          return it == behaviors[k].end() ? kAbsent : it->second;
        };
        const auto& a = lookup(i);
        const auto& b = lookup(j);
        if (a.signature() == b.signature()) continue;
        auto f = base(VulnCategory::V6_EnvDivergence, SubMode::None, profile);
        f.api = api;
        f.scenario = scenario.name;
        f.evidence_seqs = a.calls.empty() ? b.seqs() : a.seqs();
        f.evidence_refs = {"env:" + envs[i].name, "env:" + envs[j].name};
        for (const auto& step : scenario.steps) {
          if (step.op == StepOp::ReadClipboard || step.op == StepOp::CallApi) {
            f.mini_program = step.mini_program;
            break;
          }
        }
        f.description = api + ": " + envs[i].name + " " + summary(a) + ", " + envs[j].name + " " +
                        summary(b);
        std::string marks;
        if (flagged(a)) marks += envs[i].name;
        if (flagged(b)) marks += (marks.empty() ? "" : ", ") + envs[j].name;
        if (!marks.empty()) f.description += " (flagged: " + marks + ")";
        out.push_back(std::move(f));
      }
    }
  }
  return out;
}

std::set<VulnCategory> scenario_coverage(const Scenario& scenario, std::size_t env_count) {
  std::set<VulnCategory> out(scenario.covers.begin(), scenario.covers.end());
  if (scenario.steps.empty()) return out;
  out.insert(VulnCategory::V2_PelApi);
  for (const auto& s : scenario.steps) {
    switch (s.op) {
      case StepOp::Reopen:
        out.insert(VulnCategory::V1_CacheReuse);
        break;
      case StepOp::CallApi:
        out.insert(VulnCategory::V3_StealthTransfer);
        if (s.channel == Channel::Webview) out.insert(VulnCategory::V5_WebviewBypass);
        break;
      case StepOp::RequestScope:
      case StepOp::RevokeScope:
      case StepOp::Delete:
        out.insert(VulnCategory::V4_PermissionMgmt);
        break;
      case StepOp::ReadClipboard:
        if (env_count >= 2) out.insert(VulnCategory::V6_EnvDivergence);
        break;
      default:
        break;
    }
  }
  return out;
}

RunAllResult run_all(const HostProfile& profile, const std::vector<ApiSpec>& registry,
                     const std::vector<Scenario>& scenarios, const std::vector<OsEnvProfile>& envs) {
  HostProfile p = profile;
  p.registry = registry;
  validate_registry(p.registry, p.scope_table);

  RunAllResult result;
  result.row.host_id = p.host_id;
  result.row.platform = p.platform;
  std::set<VulnCategory> covered;

  result.findings = detect_pel_api(p);
  for (const auto& sc : scenarios) {
    std::vector<OsEnvProfile> sc_envs = envs;
    if (sc_envs.empty()) {
      for (const auto& name : sc.envs) sc_envs.push_back(resolve_env(name));
    }
    auto cov = scenario_coverage(sc, sc_envs.size());
    covered.insert(cov.begin(), cov.end());

    auto run = run_scenario(p, sc);
    const Trace& trace = run.world.trace();
    auto tag = [&](std::vector<Finding> fs) {
      for (auto& f : fs) {
        f.scenario = sc.name;
        result.findings.push_back(std::move(f));
      }
    };
    tag(detect_cache_reuse(trace, p));
    tag(detect_stealth_transfer(trace, p));
    tag(detect_mgmt_issues(run.world, p));
    tag(detect_webview_bypass(trace, p));
    if (sc_envs.size() >= 2 && cov.count(VulnCategory::V6_EnvDivergence)) {
      tag(detect_env_divergence(sc, sc_envs, p));
    }
  }
  sort_findings(result.findings);

  for (auto cat : kAllCategories) {
    auto& cell = result.row.cells[static_cast<std::size_t>(cat)];
    const bool hit = std::any_of(result.findings.begin(), result.findings.end(),
                                 [&](const Finding& f) { return f.category == cat; });
    if (covered.count(cat)) cell = hit ? CellStatus::Vulnerable : CellStatus::NotVulnerable;
    if (auto it = p.metadata.matrix_overrides.find(cat); it != p.metadata.matrix_overrides.end()) {
      cell = it->second;
    }
  }
  return result;
}

RunAllResult run_all(const HostProfile& profile, const std::vector<Scenario>& scenarios,
                     const std::vector<OsEnvProfile>& envs) {
  return run_all(profile, profile.registry, scenarios, envs);
}

}  // namespace miniperm
