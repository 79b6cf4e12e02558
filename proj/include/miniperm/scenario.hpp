#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "miniperm/error.hpp"
#include "miniperm/profile.hpp"
#include "miniperm/world.hpp"

namespace miniperm {

enum class StepOp {
  Launch,
  RequestScope,
  CallApi,
  RevokeScope,
  Delete,
  Close,
  Reopen,
  SwitchAccount,
  ReadClipboard,
  SetOsGrant,
  CacheFile,
  AccessFile,
};

std::string_view to_string(StepOp op);

/// One scripted user or mini-program action. User decisions are inputs.
struct Step {
  StepOp op = StepOp::CallApi;
  std::string mini_program;
  std::string vendor;
  std::optional<ScopeId> scope;
  std::string api;
  Args args;
  Channel channel = Channel::Direct;
  std::optional<Interaction> interaction;
  UserChoice host_choice = UserChoice::Allow;
  UserChoice os_choice = UserChoice::Allow;
  UserChoice prompt_choice = UserChoice::Allow;
  std::optional<DataClass> data_class;
  GrantValue grant = GrantValue::Granted;
  std::string path;
  std::string env;
  // The step is expected to fail with this code; the run continues.
  std::optional<ErrorCode> expect_error;
};

struct Scenario {
  std::string name;
  std::map<DataClass, GrantValue> os_grants;
  std::string env;                // default env for clipboard reads
  std::vector<std::string> envs;  // env set for divergence checks
  std::set<VulnCategory> covers;  // declared in addition to inferred coverage
  std::vector<Step> steps;
};

/// Accepts a bare step array, a single scenario object, or a suite object
/// {"scenarios": [...]}. `source` names the input in error messages.
std::vector<Scenario> parse_scenarios(std::string_view text, std::string_view source);
std::vector<Scenario> load_scenarios(const std::filesystem::path& path);
/// Scenario suite shipped for a fixture profile, empty when none exists.
std::vector<Scenario> bundled_suite(std::string_view profile_key);

struct StepResult {
  std::size_t index = 0;
  StepOp op = StepOp::CallApi;
  std::optional<CallOutcome> outcome;
  std::optional<ErrorCode> error;
};

struct ScenarioRun {
  World world;
  std::vector<StepResult> results;

  std::vector<CasePath> case_paths() const;
};

/// Executes every step. A step that violates a precondition it did not
/// declare in expect_error aborts with Error naming the step index.
/// `env_override` replaces every clipboard environment in the scenario.
ScenarioRun run_scenario(const HostProfile& profile, const Scenario& scenario,
                         const OsEnvProfile* env_override = nullptr);

}  // namespace miniperm
