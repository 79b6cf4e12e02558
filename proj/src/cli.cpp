#include "miniperm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "miniperm/detectors.hpp"
#include "miniperm/error.hpp"
#include "miniperm/scanner.hpp"
#include "miniperm/scenario.hpp"
#include "miniperm/trace_io.hpp"

namespace miniperm::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

enum class Format { Json, Markdown, Text };

struct Options {
  std::vector<std::string> profiles;
  std::vector<std::string> envs;
  std::vector<std::string> scenarios;
  std::vector<std::string> packages;
  std::string registry;
  std::string corpus_index;
  std::string api = "wx.getClipboardData";
  std::string format = "json";
  std::string out;
};

Format parse_format(const std::string& s) {
  if (s == "json") return Format::Json;
  if (s == "md" || s == "markdown") return Format::Markdown;
  if (s == "text") return Format::Text;
  throw Error(ErrorCode::InvalidArgument, "unknown format '" + s + "'");
}

void emit(const Options& o, std::ostream& out, const std::string& body) {
  if (o.out.empty()) {
    out << body;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + o.out);
  f << body;
  if (!f) throw Error(ErrorCode::IoError, "cannot write " + o.out);
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

std::vector<Scenario> resolve_scenarios(const std::vector<std::string>& args, const HostProfile& profile) {
  if (args.empty()) return bundled_suite(profile.suite_key());
  std::vector<Scenario> out;
  std::vector<Scenario> suite;
  bool suite_loaded = false;
  for (const auto& arg : args) {
    std::error_code ec;
    if (fs::is_regular_file(arg, ec)) {
      auto loaded = load_scenarios(arg);
      out.insert(out.end(), loaded.begin(), loaded.end());
      continue;
    }
    if (!suite_loaded) {
      suite = bundled_suite(profile.suite_key());
      suite_loaded = true;
    }
    auto it = std::find_if(suite.begin(), suite.end(), [&](const Scenario& s) { return s.name == arg; });
    if (it == suite.end()) {
      throw Error(ErrorCode::InvalidArgument, "scenario '" + arg + "' is neither a file nor part of suite '" +
                                                  profile.suite_key() + "'");
    }
    out.push_back(*it);
  }
  return out;
}

std::vector<OsEnvProfile> resolve_envs(const std::vector<std::string>& args) {
  std::vector<OsEnvProfile> out;
  for (const auto& a : args) out.push_back(resolve_env(a));
  return out;
}

constexpr const char* kDefaultScanRegistry = "wechat";

Registry resolve_registry(const std::string& arg) {
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) return load_registry(arg);
  const auto& fixtures = fixture_profiles();
  if (auto it = fixtures.find(arg); it != fixtures.end()) return registry_of(it->second);
  for (const auto& p : bundled_profiles()) {
    if (p.host_id == arg) return registry_of(p);
  }
  throw Error(ErrorCode::UnknownHost, "registry '" + arg + "' is neither a file, a profile key nor a host id");
}

std::string event_details(const TraceEvent& e) {
  std::string out;
  const auto j = event_to_json(e);
  for (const auto& [k, v] : j.items()) {
    if (k == "seq" || k == "kind") continue;
    out += (out.empty() ? "" : " ") + k + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
  }
  return out;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const Format fmt = parse_format(o.format);
  const HostProfile profile = resolve_profile(o.profiles.front());
  const auto scenarios = resolve_scenarios(o.scenarios, profile);
  const auto envs = resolve_envs(o.envs);
  if (envs.size() > 1) throw Error(ErrorCode::InvalidArgument, "simulate accepts at most one --env");

  std::ostringstream body;
  if (fmt == Format::Markdown) body << "| Scenario | Seq | Kind | Details |\n|---|---:|---|---|\n";
  for (const auto& sc : scenarios) {
    auto run = run_scenario(profile, sc, envs.empty() ? nullptr : &envs.front());
    if (fmt == Format::Text) body << "scenario " << sc.name << "\n";
    for (const auto& e : run.world.trace()) {
      if (fmt == Format::Json) {
        ordered_json line;
        line["scenario"] = sc.name;
        const auto event = event_to_json(e);
        for (const auto& [k, v] : event.items()) line[k] = v;
        body << line.dump() << "\n";
      } else if (fmt == Format::Text) {
        body << "  #" << e.seq << " " << to_string(e.kind) << " " << event_details(e) << "\n";
      } else {
        body << "| " << sc.name << " | " << e.seq << " | " << to_string(e.kind) << " | " << event_details(e)
             << " |\n";
      }
    }
  }
  emit(o, out, body.str());
  return kExitClean;
}

int cmd_detect(const Options& o, std::ostream& out) {
  const Format fmt = parse_format(o.format);
  const HostProfile profile = resolve_profile(o.profiles.front());
  const auto scenarios = resolve_scenarios(o.scenarios, profile);
  const auto envs = resolve_envs(o.envs);
  const std::vector<ApiSpec> registry = o.registry.empty() ? profile.registry : resolve_registry(o.registry).apis;
  const auto result = run_all(profile, registry, scenarios, envs);

  std::string body;
  switch (fmt) {
    case Format::Json: {
      ordered_json j;
      j["profile"] = profile.key();
      j["findings"] = findings_to_json(result.findings);
      ordered_json row;
      for (auto c : kAllCategories) row[std::string(to_string(c))] = to_string(result.row.cells[static_cast<std::size_t>(c)]);
      j["matrix_row"] = std::move(row);
      body = dump(j);
      break;
    }
    case Format::Markdown: body = findings_to_markdown(result.findings); break;
    case Format::Text: body = findings_to_text(result.findings); break;
  }
  emit(o, out, body);
  return result.findings.empty() ? kExitClean : kExitFindings;
}

std::vector<PackageReport> scan_all(const Options& o, const Registry& registry) {
  std::optional<CorpusIndex> index;
  if (!o.corpus_index.empty()) index = load_corpus_index(o.corpus_index);
  std::vector<PackageReport> reports;
  for (const auto& arg : o.packages) {
    for (const auto& dir : discover_packages(arg)) {
      auto r = scan_package(dir, registry);
      if (index) {
        if (auto it = index->find(r.package_id); it != index->end()) r.category = it->second;
      }
      reports.push_back(std::move(r));
    }
  }
  return reports;
}

bool any_flagged(const std::vector<PackageReport>& reports) {
  return std::any_of(reports.begin(), reports.end(), [](const PackageReport& r) { return r.flagged(); });
}

int cmd_scan(const Options& o, std::ostream& out) {
  const Format fmt = parse_format(o.format);
  const auto reports = scan_all(o, resolve_registry(o.registry.empty() ? kDefaultScanRegistry : o.registry));
  std::string body;
  switch (fmt) {
    case Format::Json: body = dump(reports_to_json(reports)); break;
    case Format::Markdown: body = reports_to_markdown(reports); break;
    case Format::Text: body = reports_to_text(reports); break;
  }
  emit(o, out, body);
  return any_flagged(reports) ? kExitFindings : kExitClean;
}

int cmd_stats(const Options& o, std::ostream& out) {
  const Format fmt = parse_format(o.format);
  const auto reports = scan_all(o, resolve_registry(o.registry.empty() ? kDefaultScanRegistry : o.registry));
  const auto stats = corpus_stats(reports, o.api);
  std::string body;
  switch (fmt) {
    case Format::Json: body = dump(stats_to_json(stats)); break;
    case Format::Markdown: body = stats_to_markdown(stats); break;
    case Format::Text: body = stats_to_text(stats); break;
  }
  emit(o, out, body);
  return any_flagged(reports) ? kExitFindings : kExitClean;
}

int cmd_matrix(const Options& o, std::ostream& out) {
  const Format fmt = parse_format(o.format);
  std::vector<HostProfile> profiles;
  if (o.profiles.empty()) {
    profiles = bundled_profiles();
  } else {
    for (const auto& p : o.profiles) profiles.push_back(resolve_profile(p));
  }
  check_unique_profiles(profiles);
  const auto envs = resolve_envs(o.envs);
  std::vector<MatrixRow> rows;
  for (const auto& p : profiles) {
    rows.push_back(run_all(p, resolve_scenarios(o.scenarios, p), envs).row);
  }
  const auto matrix = build_matrix(rows);
  std::string body;
  switch (fmt) {
    case Format::Json: body = dump(matrix_to_json(matrix)); break;
    case Format::Markdown: body = matrix_to_markdown(matrix); break;
    case Format::Text: body = matrix_to_text(matrix); break;
  }
  emit(o, out, body);
  const bool vulnerable = std::any_of(rows.begin(), rows.end(), [](const MatrixRow& r) {
    return std::find(r.cells.begin(), r.cells.end(), CellStatus::Vulnerable) != r.cells.end();
  });
  return vulnerable ? kExitFindings : kExitClean;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"json", "md", "markdown", "text"}));
  cmd->add_option("--out", o.out, "Write the report to this file instead of stdout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Two-layer mini-program permission model, vulnerability detectors and package scanner",
               "miniperm"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Run scenarios and print their event traces as JSON lines");
  simulate->add_option("--profile", o.profiles, "Profile file or fixture key")->required()->expected(1);
  simulate->add_option("--scenario", o.scenarios, "Scenario file or suite scenario name")->required();
  simulate->add_option("--env", o.envs, "OS environment for clipboard reads");
  add_common(simulate, o);

  auto* detect = app.add_subcommand("detect", "Run all detectors; exit 1 when anything is found");
  detect->add_option("--profile", o.profiles, "Profile file or fixture key")->required()->expected(1);
  detect->add_option("--scenario", o.scenarios, "Scenario file or suite scenario name (default: whole suite)");
  detect->add_option("--env", o.envs, "Env set for clipboard divergence (repeatable)");
  detect->add_option("--registry", o.registry, "Registry replacing the profile's own");
  add_common(detect, o);

  auto* scan = app.add_subcommand("scan", "Scan unpacked packages for sensitive API call sites");
  scan->add_option("packages", o.packages, "Package directories or corpus roots")->required();
  scan->add_option("--registry", o.registry, "Registry file, profile key or host id (default: wechat)");
  scan->add_option("--corpus-index", o.corpus_index, "JSON map of package id to category");
  add_common(scan, o);

  auto* stats = app.add_subcommand("stats", "Per-category share of packages using an API");
  stats->add_option("packages", o.packages, "Package directories or corpus roots")->required();
  stats->add_option("--registry", o.registry, "Registry file, profile key or host id (default: wechat)");
  stats->add_option("--corpus-index", o.corpus_index, "JSON map of package id to category")->required();
  stats->add_option("--api", o.api, "Registry API to measure")->default_val("wx.getClipboardData");
  add_common(stats, o);

  auto* matrix = app.add_subcommand("matrix", "Render the host x vulnerability matrix");
  matrix->add_option("--profile", o.profiles, "Profile files or fixture keys (default: all bundled)");
  matrix->add_option("--scenario", o.scenarios, "Scenarios applied to every profile (default: each suite)");
  matrix->add_option("--env", o.envs, "Env set for clipboard divergence (repeatable)");
  add_common(matrix, o);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitClean;
  } catch (const CLI::ParseError& e) {
    err << "miniperm: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    } else {
      err << app.help();
    }
    return kExitError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (detect->parsed()) return cmd_detect(o, out);
    if (scan->parsed()) return cmd_scan(o, out);
    if (stats->parsed()) return cmd_stats(o, out);
    if (matrix->parsed()) return cmd_matrix(o, out);
  } catch (const Error& e) {
    err << "miniperm: error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "miniperm: error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace miniperm::cli
