#include "miniperm/scenario.hpp"

#include <array>

#include "json_util.hpp"
#include "miniperm/fixtures.hpp"

namespace miniperm {

using detail::Fields;
using nlohmann::json;

namespace {

constexpr std::array<std::pair<StepOp, std::string_view>, 12> kOpNames{{
    {StepOp::Launch, "launch"},
    {StepOp::RequestScope, "request_scope"},
    {StepOp::CallApi, "call_api"},
    {StepOp::RevokeScope, "revoke_scope"},
    {StepOp::Delete, "delete_mini_program"},
    {StepOp::Close, "close_mini_program"},
    {StepOp::Reopen, "reopen_mini_program"},
    {StepOp::SwitchAccount, "switch_account"},
    {StepOp::ReadClipboard, "read_clipboard"},
    {StepOp::SetOsGrant, "set_os_grant"},
    {StepOp::CacheFile, "cache_file"},
    {StepOp::AccessFile, "access_file"},
}};

StepOp parse_op(const Fields& f, const std::string& text) {
  for (const auto& [op, name] : kOpNames) {
    if (name == text) return op;
  }
  // Short aliases for the lifecycle operations.
  if (text == "delete") return StepOp::Delete;
  if (text == "close") return StepOp::Close;
  if (text == "reopen") return StepOp::Reopen;
  f.fail(f.path("op"), "unknown operation '" + text + "'");
}

template <typename F>
auto parse_with(const Fields& f, const std::string& field, const std::string& text, F parse) {
  try {
    return parse(text);
  } catch (const Error& e) {
    f.fail(field, e.what());
  }
}

ErrorCode parse_error_code(const Fields& f, const std::string& text) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::EmptyInput); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == text) return code;
  }
  f.fail(f.path("expect_error"), "unknown error code '" + text + "'");
}

Step parse_step(const json& j, const std::string& path, std::string_view source) {
  Fields f(j, path, source);
  Step s;
  s.op = parse_op(f, f.string("op"));
  auto need_mp = [&] { s.mini_program = f.string("mini_program"); };
  switch (s.op) {
    case StepOp::Launch:
      need_mp();
      s.vendor = f.string_or("vendor", s.mini_program);
      break;
    case StepOp::RequestScope:
    case StepOp::RevokeScope: {
      need_mp();
      auto scope = f.string("scope");
      if (!ScopeId::is_valid(scope)) f.fail(f.path("scope"), "invalid scope id '" + scope + "'");
      s.scope = ScopeId(scope);
      break;
    }
    case StepOp::CallApi:
      need_mp();
      s.api = f.string("api");
      break;
    case StepOp::ReadClipboard:
      need_mp();
      s.api = f.string_or("api", "");
      s.env = f.string_or("env", "");
      break;
    case StepOp::Delete:
    case StepOp::Close:
    case StepOp::Reopen:
      need_mp();
      break;
    case StepOp::SwitchAccount:
      break;
    case StepOp::SetOsGrant:
      s.data_class = parse_with(f, f.path("data_class"), f.string("data_class"), parse_data_class);
      s.grant = parse_with(f, f.path("grant"), f.string("grant"), parse_grant_value);
      break;
    case StepOp::CacheFile:
    case StepOp::AccessFile:
      need_mp();
      s.path = f.string("path");
      break;
  }
  if (f.has("args")) {
    for (const auto& [k, v] : f.object("args").items()) {
      s.args.emplace(k, literal_from_json(v, f.path("args") + "." + k));
    }
  }
  if (f.has("channel")) {
    s.channel = parse_with(f, f.path("channel"), f.string("channel"), parse_channel);
  }
  if (f.has("interaction")) {
    const auto& v = f.at("interaction");
    if (v.is_string()) {
      s.interaction = Interaction{v.get<std::string>()};
    } else if (v.is_boolean()) {
      if (v.get<bool>()) s.interaction = Interaction{"user selection"};
    } else {
      f.fail(f.path("interaction"), "expected string or boolean");
    }
  }
  if (f.has("user")) {
    Fields u(f.object("user"), f.path("user"), source);
    auto choice = [&](const char* key, UserChoice& dst) {
      if (u.has(key)) dst = parse_with(u, u.path(key), u.string(key), parse_user_choice);
    };
    choice("host", s.host_choice);
    choice("os", s.os_choice);
    choice("prompt", s.prompt_choice);
  }
  if (f.has("expect_error")) s.expect_error = parse_error_code(f, f.string("expect_error"));
  return s;
}

Scenario parse_scenario_object(const json& j, const std::string& path, std::string_view source,
                               const std::string& fallback_name) {
  Fields f(j, path, source);
  Scenario sc;
  sc.name = f.string_or("name", fallback_name);
  if (f.has("os_grants")) {
    for (const auto& [cls, value] : f.object("os_grants").items()) {
      auto field = f.path("os_grants") + "." + cls;
      if (!value.is_string()) f.fail(field, "expected grant string");
      auto dc = parse_with(f, field, cls, parse_data_class);
      if (dc == DataClass::None) f.fail(field, "no OS permission exists for data class None");
      sc.os_grants[dc] = parse_with(f, field, value.get<std::string>(), parse_grant_value);
    }
  }
  sc.env = f.string_or("env", "");
  if (f.has("envs")) {
    const auto& arr = f.array("envs");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) f.fail(f.path("envs", i), "expected env name");
      sc.envs.push_back(arr[i].get<std::string>());
    }
  }
  if (f.has("covers")) {
    const auto& arr = f.array("covers");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      if (!arr[i].is_string()) f.fail(f.path("covers", i), "expected category");
      sc.covers.insert(parse_with(f, f.path("covers", i), arr[i].get<std::string>(), parse_category));
    }
  }
  const auto& steps = f.array("steps");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    sc.steps.push_back(parse_step(steps[i], f.path("steps", i), source));
  }
  return sc;
}

std::string stem(std::string_view source) {
  return std::filesystem::path(std::string(source)).stem().string();
}

OsEnvProfile env_named(const std::string& name) {
  if (std::filesystem::is_regular_file(name)) return load_env(name);
  return bundled_env(name);
}

}  // namespace

std::string_view to_string(StepOp op) {
  for (const auto& [value, name] : kOpNames) {
    if (value == op) return name;
  }
  return "?";
}

std::vector<Scenario> parse_scenarios(std::string_view text, std::string_view source) {
  auto root = detail::parse_json(text, source);
  std::vector<Scenario> out;
  if (root.is_array()) {
    Scenario sc;
    sc.name = stem(source);
    for (std::size_t i = 0; i < root.size(); ++i) {
      sc.steps.push_back(parse_step(root[i], "[" + std::to_string(i) + "]", source));
    }
    out.push_back(std::move(sc));
    return out;
  }
  Fields f(root, "", source);
  if (f.has("scenarios")) {
    const auto& arr = f.array("scenarios");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      auto sc = parse_scenario_object(arr[i], f.path("scenarios", i), source,
                                      stem(source) + "#" + std::to_string(i));
      // Suite-level env lists apply to scenarios that do not set their own.
      if (sc.envs.empty() && f.has("envs")) {
        for (const auto& e : f.array("envs")) sc.envs.push_back(e.get<std::string>());
      }
      out.push_back(std::move(sc));
    }
    return out;
  }
  out.push_back(parse_scenario_object(root, "", source, stem(source)));
  return out;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  return parse_scenarios(detail::read_file(path), path.string());
}

std::vector<Scenario> bundled_suite(std::string_view profile_key) {
  const auto rel = "suites/" + std::string(profile_key) + ".json";
  auto text = embedded_fixture(rel);
  if (!text) return {};
  return parse_scenarios(*text, rel);
}

std::vector<CasePath> ScenarioRun::case_paths() const {
  std::vector<CasePath> out;
  for (const auto& r : results) {
    if (r.outcome) out.push_back(r.outcome->case_path);
  }
  return out;
}

ScenarioRun run_scenario(const HostProfile& profile, const Scenario& scenario,
                         const OsEnvProfile* env_override) {
  ScenarioRun run{World::create(profile, scenario.os_grants), {}};
  auto& world = run.world;
  if (env_override != nullptr) {
    world.set_default_env(*env_override);
  } else if (!scenario.env.empty()) {
    world.set_default_env(env_named(scenario.env));
  }

  for (std::size_t i = 0; i < scenario.steps.size(); ++i) {
    const Step& s = scenario.steps[i];
    StepResult result{i, s.op, std::nullopt, std::nullopt};
    try {
      switch (s.op) {
        case StepOp::Launch:
          world.launch(s.mini_program, s.vendor);
          break;
        case StepOp::RequestScope:
          result.outcome = world.request_scope(s.mini_program, *s.scope, s.host_choice, s.os_choice);
          break;
        case StepOp::CallApi:
          result.outcome = world.call_api(s.mini_program, s.api, s.args, s.channel, s.interaction,
                                          s.prompt_choice);
          break;
        case StepOp::RevokeScope:
          world.revoke_scope(s.mini_program, *s.scope);
          break;
        case StepOp::Delete:
          world.delete_mini_program(s.mini_program);
          break;
        case StepOp::Close:
          world.close_mini_program(s.mini_program);
          break;
        case StepOp::Reopen:
          world.reopen_mini_program(s.mini_program);
          break;
        case StepOp::SwitchAccount:
          world.switch_account();
          break;
        case StepOp::ReadClipboard: {
          OsEnvProfile env = env_override != nullptr ? *env_override
                             : !s.env.empty()        ? env_named(s.env)
                                                     : world.default_env();
          std::optional<std::string> api;
          if (!s.api.empty()) api = s.api;
          result.outcome = world.read_clipboard(s.mini_program, env, s.prompt_choice, api);
          break;
        }
        case StepOp::SetOsGrant:
          world.set_os_grant(*s.data_class, s.grant);
          break;
        case StepOp::CacheFile:
          world.cache_file(s.mini_program, s.path);
          break;
        case StepOp::AccessFile:
          world.access_file(s.mini_program, s.path);
          break;
      }
    } catch (const Error& e) {
      if (s.expect_error && *s.expect_error == e.code()) {
        result.error = e.code();
      } else {
        throw Error(e.code(), "scenario '" + scenario.name + "' step " + std::to_string(i) + " (" +
                                  std::string(to_string(s.op)) + "): " + e.what());
      }
    }
    if (s.expect_error && !result.error) {
      throw Error(ErrorCode::InvalidArgument,
                  "scenario '" + scenario.name + "' step " + std::to_string(i) + " (" +
                      std::string(to_string(s.op)) + "): expected error " +
                      std::string(to_string(*s.expect_error)) + " did not occur");
    }
    run.results.push_back(std::move(result));
  }
  return run;
}

}  // namespace miniperm
