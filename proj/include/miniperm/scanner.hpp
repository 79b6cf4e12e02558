#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "miniperm/finding.hpp"
#include "miniperm/profile.hpp"
#include "miniperm/types.hpp"

namespace miniperm {

enum class CallForm { DotCall, BracketStringCall, Unresolved };

std::string_view to_string(CallForm v);

struct CallSite {
  std::string file;
  std::uint32_t line = 1;    // 1-based
  std::uint32_t column = 1;  // 1-based byte column of the receiver token
  std::string receiver;
  // Context type when the receiver was assigned from recv.createXxxContext(),
  // e.g. "MapContext". Empty otherwise.
  std::string receiver_type;
  // Empty for Unresolved sites.
  std::string api_name;
  CallForm call_form = CallForm::DotCall;
  // First-argument object-literal entries whose values are literals.
  std::map<std::string, Literal> literal_args;

  /// "receiver.api_name", using the context type when known.
  std::string qualified_name() const;

  friend bool operator==(const CallSite&, const CallSite&) = default;
};

struct Extraction {
  std::vector<CallSite> sites;
  std::size_t anomalies = 0;
};

/// Member calls in script source, in source order.
Extraction extract_calls(std::string_view source, std::string_view file = "");
std::vector<CallSite> extract_call_sites(std::string_view source, std::string_view file = "");

struct Manifest {
  std::string file;  // "app.json" or "manifest.json"
  std::vector<std::string> pages;
  std::optional<std::string> category;
};

struct ScriptFile {
  std::string path;  // relative to the package root, '/' separated
  std::string text;
};

struct FileIssue {
  std::string path;
  std::string message;

  friend bool operator==(const FileIssue&, const FileIssue&) = default;
};

struct PackageTree {
  std::filesystem::path root_path;
  std::string package_id;
  Manifest manifest;
  std::vector<ScriptFile> scripts;  // sorted by path
  std::vector<FileIssue> issues;    // unreadable files; loading continues
};

/// Throws Error(IoError) when `dir` is not a directory, Error(MissingManifest)
/// without app.json or manifest.json, Error(ParseError) for a broken manifest.
PackageTree load_package(const std::filesystem::path& dir);

struct MatchedSite {
  std::size_t site = 0;  // index into the report's call_sites
  std::string api;       // registry name
  DataClass data_class = DataClass::None;
  std::vector<SubMode> pel;  // V2 sub-modes of the API
  // Background-capable clipboard read, silent on most hosts.
  bool clipboard_read = false;
  // Param-leak rules whose trigger value appears among the literal args.
  std::vector<std::string> leak_params;

  bool flagged() const { return !pel.empty() || clipboard_read || !leak_params.empty(); }

  friend bool operator==(const MatchedSite&, const MatchedSite&) = default;
};

/// Joins sites on their qualified name. A vendor global receiver (wx, qq,
/// my, tt, swan, ...) matches a registry API with any vendor prefix and the
/// same member name; an exact prefix match wins.
std::vector<MatchedSite> match_registry(const std::vector<CallSite>& sites, const Registry& registry);

struct PackageReport {
  std::string package_id;
  std::optional<std::string> category;
  std::vector<CallSite> call_sites;  // ordered by (file, line, column)
  std::vector<MatchedSite> matched;
  std::size_t unresolved_count = 0;
  std::size_t anomalies = 0;
  std::vector<FileIssue> issues;

  bool flagged() const;
};

PackageReport scan_tree(const PackageTree& tree, const Registry& registry);
PackageReport scan_package(const std::filesystem::path& dir, const Registry& registry);

/// A directory with a manifest is one package; otherwise each immediate
/// subdirectory with a manifest is. Sorted by path.
std::vector<std::filesystem::path> discover_packages(const std::filesystem::path& path);

using CorpusIndex = std::map<std::string, std::string>;

/// JSON object mapping package_id to category.
CorpusIndex parse_corpus_index(std::string_view text, std::string_view source = "<index>");
CorpusIndex load_corpus_index(const std::filesystem::path& path);

struct CategoryStat {
  std::string category;
  std::size_t with_api = 0;
  std::size_t total = 0;
  double proportion = 0.0;
};

struct StatsTable {
  std::string api;
  std::vector<CategoryStat> categories;  // sorted by name
  CategoryStat overall;
};

/// Packages without a category count as "other". Throws Error(EmptyInput)
/// for an empty report set.
StatsTable corpus_stats(const std::vector<PackageReport>& reports, std::string_view api_name);

nlohmann::ordered_json call_site_to_json(const CallSite& site);
nlohmann::ordered_json report_to_json(const PackageReport& report);
nlohmann::ordered_json reports_to_json(const std::vector<PackageReport>& reports);
std::string reports_to_text(const std::vector<PackageReport>& reports);
std::string reports_to_markdown(const std::vector<PackageReport>& reports);
nlohmann::ordered_json stats_to_json(const StatsTable& stats);
std::string stats_to_text(const StatsTable& stats);
std::string stats_to_markdown(const StatsTable& stats);

}  // namespace miniperm
