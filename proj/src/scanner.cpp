#include "miniperm/scanner.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <iomanip>
#include <set>
#include <sstream>

#include "js_lexer.hpp"
#include "json_util.hpp"
#include "miniperm/detectors.hpp"
#include "miniperm/error.hpp"

namespace miniperm {

using detail::LexResult;
using detail::Token;
using detail::TokKind;
using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string_view to_string(CallForm v) {
  switch (v) {
    case CallForm::DotCall: return "DotCall";
    case CallForm::BracketStringCall: return "BracketStringCall";
    case CallForm::Unresolved: return "Unresolved";
  }
  return "?";
}

std::string CallSite::qualified_name() const {
  return (receiver_type.empty() ? receiver : receiver_type) + "." + api_name;
}

namespace {

constexpr std::array<std::string_view, 14> kVendorGlobals{
    "wx", "qq", "my", "tt", "swan", "uni", "Taro", "up", "dd", "ks", "jd", "qh", "xhs", "has",
};

bool is_vendor_global(std::string_view name) {
  return std::find(kVendorGlobals.begin(), kVendorGlobals.end(), name) != kVendorGlobals.end();
}

bool is_punct(const std::vector<Token>& t, std::size_t i, std::string_view text) {
  return i < t.size() && t[i].kind == TokKind::Punct && t[i].text == text;
}

bool is_ident(const std::vector<Token>& t, std::size_t i) {
  return i < t.size() && t[i].kind == TokKind::Ident;
}

// "createMapContext" -> "MapContext".
std::string context_type(std::string_view factory) {
  constexpr std::string_view kPrefix = "create";
  constexpr std::string_view kSuffix = "Context";
  if (factory.size() <= kPrefix.size() + kSuffix.size() || factory.substr(0, kPrefix.size()) != kPrefix ||
      factory.substr(factory.size() - kSuffix.size()) != kSuffix) {
    return {};
  }
  return std::string(factory.substr(kPrefix.size()));
}

// Index of the bracket closing the one at `open`, or t.size().
std::size_t matching(const std::vector<Token>& t, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < t.size(); ++i) {
    if (t[i].kind != TokKind::Punct) continue;
    const auto& s = t[i].text;
    if (s == "(" || s == "[" || s == "{") ++depth;
    if (s == ")" || s == "]" || s == "}") {
      if (--depth == 0) return i;
    }
  }
  return t.size();
}

std::optional<double> number_value(std::string text) {
  text.erase(std::remove(text.begin(), text.end(), '_'), text.end());
  if (!text.empty() && text.back() == 'n') text.pop_back();
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'b' || text[1] == 'B' || text[1] == 'o' || text[1] == 'O')) {
    const int base = (text[1] == 'b' || text[1] == 'B') ? 2 : 8;
    return static_cast<double>(std::strtoull(text.c_str() + 2, nullptr, base));
  }
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str()) return std::nullopt;
  return v;
}

// Literal value starting at t[j] that ends right before a ',' or '}'.
std::optional<Literal> literal_at(const std::vector<Token>& t, std::size_t j, std::size_t& next) {
  auto ends_at = [&](std::size_t k) { return is_punct(t, k, ",") || is_punct(t, k, "}"); };
  if (j >= t.size()) return std::nullopt;
  const Token& v = t[j];
  if (v.kind == TokKind::Ident && (v.text == "true" || v.text == "false") && ends_at(j + 1)) {
    next = j + 1;
    return Literal{v.text == "true"};
  }
  if (v.kind == TokKind::String && ends_at(j + 1)) {
    next = j + 1;
    return Literal{v.text};
  }
  if (v.kind == TokKind::Number && ends_at(j + 1)) {
    if (auto d = number_value(v.text)) {
      next = j + 1;
      return Literal{*d};
    }
  }
  // Minified booleans and negative numbers.
  if (is_punct(t, j, "!") && j + 1 < t.size() && t[j + 1].kind == TokKind::Number && ends_at(j + 2)) {
    if (auto d = number_value(t[j + 1].text)) {
      next = j + 2;
      return Literal{*d == 0.0};
    }
  }
  if (is_punct(t, j, "-") && j + 1 < t.size() && t[j + 1].kind == TokKind::Number && ends_at(j + 2)) {
    if (auto d = number_value(t[j + 1].text)) {
      next = j + 2;
      return Literal{-*d};
    }
  }
  return std::nullopt;
}

// Entries of the object literal opening at t[open].
std::map<std::string, Literal> object_literal(const std::vector<Token>& t, std::size_t open) {
  std::map<std::string, Literal> out;
  const std::size_t close = matching(t, open);
  std::size_t j = open + 1;
  while (j < close) {
    const bool keyed = j + 1 < close && is_punct(t, j + 1, ":") &&
                       (t[j].kind == TokKind::Ident || t[j].kind == TokKind::String ||
                        t[j].kind == TokKind::Number);
    if (keyed) {
      std::size_t next = j + 2;
      if (auto lit = literal_at(t, j + 2, next); lit && next <= close) {
        out.insert_or_assign(t[j].text, *lit);
        j = next;
      } else {
        j += 2;
      }
    }
    // Skip to the next entry at this nesting level.
    while (j < close && !is_punct(t, j, ",")) {
      if (t[j].kind == TokKind::Punct && (t[j].text == "(" || t[j].text == "[" || t[j].text == "{")) {
        j = std::min(matching(t, j), close);
      }
      ++j;
    }
    ++j;
  }
  return out;
}

// Index of the '(' that starts the call when t[i] begins one ("(" or "?.(").
std::optional<std::size_t> call_paren(const std::vector<Token>& t, std::size_t i) {
  if (is_punct(t, i, "(")) return i;
  if (is_punct(t, i, "?.") && is_punct(t, i + 1, "(")) return i + 1;
  return std::nullopt;
}

}  // namespace

Extraction extract_calls(std::string_view source, std::string_view file) {
  const LexResult lexed = detail::lex_js(source);
  const auto& t = lexed.tokens;
  Extraction out;
  out.anomalies = lexed.anomalies;
  std::map<std::string, std::string> aliases;

  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i].kind != TokKind::Ident) continue;

    // Alias tracking: x = recv.createXxxContext(...)
    if (is_punct(t, i + 1, "=") && !is_punct(t, i + 2, "=")) {
      std::string type;
      if (is_ident(t, i + 2) && (is_punct(t, i + 3, ".") || is_punct(t, i + 3, "?.")) && is_ident(t, i + 4) &&
          call_paren(t, i + 5)) {
        type = context_type(t[i + 4].text);
      }
      if (type.empty()) {
        aliases.erase(t[i].text);
      } else {
        aliases[t[i].text] = type;
      }
    }

    CallSite site;
    site.file = std::string(file);
    site.line = t[i].line;
    site.column = t[i].column;
    site.receiver = t[i].text;
    std::optional<std::size_t> paren;

    if ((is_punct(t, i + 1, ".") || is_punct(t, i + 1, "?.")) && is_ident(t, i + 2)) {
      paren = call_paren(t, i + 3);
      if (!paren) continue;
      site.api_name = t[i + 2].text;
      site.call_form = CallForm::DotCall;
    } else if (is_punct(t, i + 1, "[") || (is_punct(t, i + 1, "?.") && is_punct(t, i + 2, "["))) {
      const std::size_t open = is_punct(t, i + 1, "[") ? i + 1 : i + 2;
      const std::size_t close = matching(t, open);
      if (close >= t.size()) continue;
      paren = call_paren(t, close + 1);
      if (!paren) continue;
      if (close == open + 2 && t[open + 1].kind == TokKind::String) {
        site.api_name = t[open + 1].text;
        site.call_form = CallForm::BracketStringCall;
      } else {
        site.call_form = CallForm::Unresolved;
      }
    } else {
      continue;
    }
    if (auto it = aliases.find(site.receiver); it != aliases.end()) site.receiver_type = it->second;
    if (site.call_form != CallForm::Unresolved && is_punct(t, *paren + 1, "{")) {
      site.literal_args = object_literal(t, *paren + 1);
    }
    out.sites.push_back(std::move(site));
  }
  return out;
}

std::vector<CallSite> extract_call_sites(std::string_view source, std::string_view file) {
  return extract_calls(source, file).sites;
}

namespace {

constexpr std::array<std::string_view, 6> kScriptExtensions{".js", ".mjs", ".cjs", ".ts", ".wxs", ".sjs"};
constexpr std::array<std::string_view, 2> kManifestNames{"app.json", "manifest.json"};

std::optional<fs::path> manifest_path(const fs::path& dir) {
  for (auto name : kManifestNames) {
    std::error_code ec;
    auto p = dir / std::string(name);
    if (fs::is_regular_file(p, ec)) return p;
  }
  return std::nullopt;
}

std::string package_name(const fs::path& dir) {
  auto p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  auto name = p.filename().string();
  if (name.empty() || name == ".") name = fs::absolute(p).lexically_normal().filename().string();
  return name;
}

Manifest parse_manifest(const fs::path& path) {
  Manifest m;
  m.file = path.filename().string();
  const auto root = detail::parse_json(detail::read_file(path), path.string());
  if (!root.is_object()) detail::schema_fail(path.string(), "", "manifest must be a JSON object");
  auto pages = root.find("pages");
  if (pages == root.end()) {
    // QuickApp manifests list pages under router.pages.
    if (auto router = root.find("router"); router != root.end() && router->is_object()) {
      if (auto rp = router->find("pages"); rp != router->end() && rp->is_object()) {
        for (const auto& [name, _] : rp->items()) m.pages.push_back(name);
      }
    }
  } else if (pages->is_array()) {
    for (const auto& p : *pages) {
      if (p.is_string()) m.pages.push_back(p.get<std::string>());
    }
  }
  if (auto cat = root.find("category"); cat != root.end() && cat->is_string()) {
    m.category = cat->get<std::string>();
  }
  return m;
}

}  // namespace

PackageTree load_package(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  }
  auto manifest = manifest_path(dir);
  if (!manifest) {
    throw Error(ErrorCode::MissingManifest, "no app.json or manifest.json in " + dir.string());
  }
  PackageTree tree;
  tree.root_path = dir;
  tree.package_id = package_name(dir);
  tree.manifest = parse_manifest(*manifest);

  std::vector<fs::path> files;
  fs::recursive_directory_iterator it(dir, fs::directory_options::skip_permission_denied, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + dir.string() + ": " + ec.message());
  for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) {
      tree.issues.push_back({it->path().lexically_relative(dir).generic_string(), ec.message()});
      ec.clear();
      continue;
    }
    if (!it->is_regular_file(ec)) continue;
    const auto ext = it->path().extension().string();
    if (std::find(kScriptExtensions.begin(), kScriptExtensions.end(), ext) == kScriptExtensions.end()) continue;
    files.push_back(it->path());
  }
  for (const auto& f : files) {
    const auto rel = f.lexically_relative(dir).generic_string();
    try {
      tree.scripts.push_back({rel, detail::read_file(f)});
    } catch (const Error& e) {
      tree.issues.push_back({rel, e.what()});
    }
  }
  std::sort(tree.scripts.begin(), tree.scripts.end(),
            [](const ScriptFile& a, const ScriptFile& b) { return a.path < b.path; });
  std::sort(tree.issues.begin(), tree.issues.end(),
            [](const FileIssue& a, const FileIssue& b) { return a.path < b.path; });
  return tree;
}

std::vector<MatchedSite> match_registry(const std::vector<CallSite>& sites, const Registry& registry) {
  std::map<std::string, const ApiSpec*> by_name;
  // member name -> first vendor-prefixed API with that member
  std::map<std::string, const ApiSpec*> by_member;
  for (const auto& api : registry.apis) {
    by_name.emplace(api.name, &api);
    const auto dot = api.name.find('.');
    if (dot != std::string::npos && is_vendor_global(std::string_view(api.name).substr(0, dot))) {
      by_member.emplace(api.name.substr(dot + 1), &api);
    }
  }

  std::vector<MatchedSite> out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto& s = sites[i];
    if (s.call_form == CallForm::Unresolved) continue;
    const ApiSpec* api = nullptr;
    if (auto it = by_name.find(s.qualified_name()); it != by_name.end()) {
      api = it->second;
    } else if (s.receiver_type.empty() && is_vendor_global(s.receiver)) {
      if (auto m = by_member.find(s.api_name); m != by_member.end()) api = m->second;
    }
    if (api == nullptr) continue;
    MatchedSite m;
    m.site = i;
    m.api = api->name;
    m.data_class = api->data_class;
    m.pel = classify_pel_api(*api, registry.scope_table);
    m.clipboard_read = api->data_class == DataClass::Clipboard && api->background_capable;
    for (const auto& rule : api->param_leaks) {
      auto arg = s.literal_args.find(rule.param_name);
      if (arg != s.literal_args.end() && arg->second == rule.trigger_value) {
        m.leak_params.push_back(rule.param_name);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

bool PackageReport::flagged() const {
  return std::any_of(matched.begin(), matched.end(), [](const MatchedSite& m) { return m.flagged(); });
}

PackageReport scan_tree(const PackageTree& tree, const Registry& registry) {
  PackageReport r;
  r.package_id = tree.package_id;
  r.category = tree.manifest.category;
  r.issues = tree.issues;
  for (const auto& script : tree.scripts) {
    auto ex = extract_calls(script.text, script.path);
    r.anomalies += ex.anomalies;
    for (auto& s : ex.sites) r.call_sites.push_back(std::move(s));
  }
  std::stable_sort(r.call_sites.begin(), r.call_sites.end(), [](const CallSite& a, const CallSite& b) {
    return std::tie(a.file, a.line, a.column) < std::tie(b.file, b.line, b.column);
  });
  r.unresolved_count = static_cast<std::size_t>(std::count_if(
      r.call_sites.begin(), r.call_sites.end(), [](const CallSite& s) { return s.call_form == CallForm::Unresolved; }));
  r.matched = match_registry(r.call_sites, registry);
  return r;
}

PackageReport scan_package(const fs::path& dir, const Registry& registry) {
  return scan_tree(load_package(dir), registry);
}

std::vector<fs::path> discover_packages(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_directory(path, ec)) throw Error(ErrorCode::IoError, "not a directory: " + path.string());
  if (manifest_path(path)) return {path};
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(path, ec)) {
    if (entry.is_directory(ec) && manifest_path(entry.path())) out.push_back(entry.path());
  }
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + path.string() + ": " + ec.message());
  if (out.empty()) {
    throw Error(ErrorCode::MissingManifest,
                "no app.json or manifest.json in " + path.string() + " or its subdirectories");
  }
  std::sort(out.begin(), out.end());
  return out;
}

CorpusIndex parse_corpus_index(std::string_view text, std::string_view source) {
  const auto root = detail::parse_json(text, source);
  if (!root.is_object()) detail::schema_fail(source, "", "corpus index must map package ids to categories");
  CorpusIndex out;
  for (const auto& [id, cat] : root.items()) {
    if (!cat.is_string()) detail::schema_fail(source, id, "category must be a string");
    out.emplace(id, cat.get<std::string>());
  }
  return out;
}

CorpusIndex load_corpus_index(const fs::path& path) {
  return parse_corpus_index(detail::read_file(path), path.string());
}

StatsTable corpus_stats(const std::vector<PackageReport>& reports, std::string_view api_name) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no package reports to summarize");
  StatsTable table;
  table.api = std::string(api_name);
  std::map<std::string, CategoryStat> by_cat;
  for (const auto& r : reports) {
    const std::string cat = r.category.value_or("other");
    auto& s = by_cat[cat];
    s.category = cat;
    ++s.total;
    ++table.overall.total;
    const bool uses = std::any_of(r.matched.begin(), r.matched.end(),
                                  [&](const MatchedSite& m) { return m.api == api_name; });
    if (uses) {
      ++s.with_api;
      ++table.overall.with_api;
    }
  }
  auto ratio = [](CategoryStat& s) {
    s.proportion = static_cast<double>(s.with_api) / static_cast<double>(s.total);
  };
  for (auto& [_, s] : by_cat) {
    ratio(s);
    table.categories.push_back(s);
  }
  table.overall.category = "overall";
  ratio(table.overall);
  return table;
}

ordered_json call_site_to_json(const CallSite& s) {
  ordered_json j;
  j["file"] = s.file;
  j["line"] = s.line;
  j["column"] = s.column;
  j["receiver"] = s.receiver;
  if (!s.receiver_type.empty()) j["receiver_type"] = s.receiver_type;
  j["api_name"] = s.api_name.empty() ? ordered_json(nullptr) : ordered_json(s.api_name);
  j["call_form"] = to_string(s.call_form);
  ordered_json args = ordered_json::object();
  for (const auto& [k, v] : s.literal_args) args[k] = literal_to_json(v);
  j["literal_args"] = std::move(args);
  return j;
}

ordered_json report_to_json(const PackageReport& r) {
  ordered_json j;
  j["package_id"] = r.package_id;
  j["category"] = r.category ? ordered_json(*r.category) : ordered_json(nullptr);
  ordered_json sites = ordered_json::array();
  for (const auto& s : r.call_sites) sites.push_back(call_site_to_json(s));
  j["call_sites"] = std::move(sites);
  ordered_json matched = ordered_json::array();
  for (const auto& m : r.matched) {
    const auto& s = r.call_sites[m.site];
    ordered_json e;
    e["site"] = m.site;
    e["file"] = s.file;
    e["line"] = s.line;
    e["column"] = s.column;
    e["api"] = m.api;
    e["data_class"] = to_string(m.data_class);
    ordered_json pel = ordered_json::array();
    for (auto p : m.pel) pel.push_back(to_string(p));
    e["pel"] = std::move(pel);
    e["clipboard_read"] = m.clipboard_read;
    e["leak_params"] = m.leak_params;
    matched.push_back(std::move(e));
  }
  j["matched"] = std::move(matched);
  j["unresolved_count"] = r.unresolved_count;
  j["anomalies"] = r.anomalies;
  ordered_json issues = ordered_json::array();
  for (const auto& i : r.issues) issues.push_back({{"path", i.path}, {"message", i.message}});
  j["issues"] = std::move(issues);
  return j;
}

ordered_json reports_to_json(const std::vector<PackageReport>& reports) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(report_to_json(r));
  return arr;
}

namespace {

std::string match_tags(const MatchedSite& m) {
  std::string tags;
  auto add = [&](std::string_view t) { tags += (tags.empty() ? "" : ", ") + std::string(t); };
  for (auto p : m.pel) add(to_string(p));
  if (m.clipboard_read) add("silent clipboard read");
  for (const auto& p : m.leak_params) add("leaks via " + p);
  return tags;
}

}  // namespace

std::string reports_to_text(const std::vector<PackageReport>& reports) {
  std::ostringstream os;
  for (const auto& r : reports) {
    os << r.package_id << " (" << r.category.value_or("uncategorized") << "): " << r.call_sites.size()
       << " call sites, " << r.matched.size() << " matched, " << r.unresolved_count << " unresolved\n";
    for (const auto& m : r.matched) {
      const auto& s = r.call_sites[m.site];
      os << "  " << s.file << ":" << s.line << ":" << s.column << "  " << m.api;
      if (auto tags = match_tags(m); !tags.empty()) os << "  [" << tags << "]";
      os << "\n";
    }
    for (const auto& i : r.issues) os << "  ! " << i.path << ": " << i.message << "\n";
  }
  return os.str();
}

std::string reports_to_markdown(const std::vector<PackageReport>& reports) {
  std::ostringstream os;
  os << "| Package | Location | API | Flags |\n|---|---|---|---|\n";
  for (const auto& r : reports) {
    for (const auto& m : r.matched) {
      const auto& s = r.call_sites[m.site];
      os << "| " << r.package_id << " | " << s.file << ":" << s.line << ":" << s.column << " | " << m.api << " | "
         << match_tags(m) << " |\n";
    }
  }
  return os.str();
}

ordered_json stats_to_json(const StatsTable& stats) {
  auto row = [](const CategoryStat& s) {
    ordered_json j;
    j["category"] = s.category;
    j["with_api"] = s.with_api;
    j["total"] = s.total;
    j["proportion"] = s.proportion;
    return j;
  };
  ordered_json j;
  j["api"] = stats.api;
  ordered_json cats = ordered_json::array();
  for (const auto& c : stats.categories) cats.push_back(row(c));
  j["categories"] = std::move(cats);
  j["overall"] = row(stats.overall);
  return j;
}

namespace {

std::vector<std::vector<std::string>> stats_rows(const StatsTable& stats) {
  std::vector<std::vector<std::string>> rows{{"category", "with_api", "total", "proportion"}};
  auto add = [&](const CategoryStat& s) {
    std::ostringstream p;
    p << std::fixed << std::setprecision(4) << s.proportion;
    rows.push_back({s.category, std::to_string(s.with_api), std::to_string(s.total), p.str()});
  };
  for (const auto& c : stats.categories) add(c);
  add(stats.overall);
  return rows;
}

}  // namespace

std::string stats_to_text(const StatsTable& stats) {
  auto rows = stats_rows(stats);
  std::array<std::size_t, 4> width{};
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < 4; ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream os;
  os << stats.api << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width[0])) << r[0];
    for (std::size_t i = 1; i < 4; ++i) os << "  " << std::right << std::setw(static_cast<int>(width[i])) << r[i];
    os << "\n";
  }
  return os.str();
}

std::string stats_to_markdown(const StatsTable& stats) {
  auto rows = stats_rows(stats);
  std::ostringstream os;
  os << "| Category | With " << stats.api << " | Total | Proportion |\n|---|---:|---:|---:|\n";
  for (std::size_t i = 1; i < rows.size(); ++i) {
    os << "| " << rows[i][0] << " | " << rows[i][1] << " | " << rows[i][2] << " | " << rows[i][3] << " |\n";
  }
  return os.str();
}

}  // namespace miniperm
