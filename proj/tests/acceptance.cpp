// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "miniperm/cli.hpp"
#include "miniperm/detectors.hpp"
#include "miniperm/scanner.hpp"
#include "miniperm/scenario.hpp"
#include "support/planted_corpus.hpp"
#include "support/truth_table.hpp"

using namespace miniperm;
namespace fs = std::filesystem;

namespace {

constexpr double kRunLimitSeconds = 1.0;
constexpr double kCorpusLimitSeconds = 30.0;
constexpr double kProportionTolerance = 1e-12;
constexpr std::uint32_t kCorpusSeed = 20210619;

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Scenario suite_scenario(const std::string& profile, const std::string& name) {
  for (auto& s : bundled_suite(profile)) {
    if (s.name == name) return s;
  }
  throw std::runtime_error("missing scenario " + name + " in " + profile);
}

bool has(const std::vector<Finding>& fs, VulnCategory c, SubMode m = SubMode::None) {
  return std::any_of(fs.begin(), fs.end(), [&](const Finding& f) {
    return f.category == c && (m == SubMode::None || f.sub_mode == m);
  });
}

std::vector<Finding> suite_findings(const std::string& key) {
  const auto& p = fixture_profile(key);
  return run_all(p, bundled_suite(p.suite_key())).findings;
}

Verdict three_cases() {
  Verdict v;
  const auto start = Clock::now();
  const auto run = run_scenario(bundled_profile("wechat-android"), suite_scenario("wechat-android", "three-cases"));
  const double elapsed = seconds_since(start);
  const std::vector<CasePath> expected{CasePath::BothAllow, CasePath::HostRejectOsAllow, CasePath::OsReject};
  v.require(run.case_paths() == expected, "case_path sequence differs");
  v.require(elapsed < kRunLimitSeconds, "runtime " + std::to_string(elapsed) + " s");
  v.detail = v.pass ? "[BothAllow, HostRejectOsAllow, OsReject] in " + std::to_string(elapsed) + " s" : v.detail;
  return v;
}

Verdict truth_table() {
  Verdict v;
  std::size_t agree = 0;
  const auto cells = testing::all_cells();
  for (const auto& c : cells) {
    if (testing::simulate_release(c) == testing::oracle_release(c)) ++agree;
  }
  v.require(cells.size() == 24 && agree == 24, std::to_string(agree) + "/24 cells agree");
  for (bool enforced : {true, false}) {
    for (bool background : {true, false}) {
      bool leaks = false;
      for (const auto& c : cells) {
        if (c.host == GrantValue::Denied && c.enforced == enforced && c.background == background) {
          leaks = leaks || testing::simulate_release(c);
        }
      }
      const bool flagged = !detect_pel_api(testing::cell_profile(enforced, background)).empty();
      v.require(flagged == leaks, "detect_pel_api disagrees for enforced=" + std::to_string(enforced) +
                                      " background=" + std::to_string(background));
    }
  }
  if (v.pass) v.detail = "24/24 cells; static flag matches host-denied release for all 4 API shapes";
  return v;
}

Verdict pel_table() {
  Verdict v;
  std::set<std::pair<std::string, SubMode>> got;
  for (const auto& p : bundled_profiles()) {
    for (const auto& f : detect_pel_api(p)) got.insert({f.api.value_or(""), f.sub_mode});
  }
  const std::set<std::pair<std::string, SubMode>> expected{
      {"wx.searchContacts", SubMode::QualificationIgnored},
      {"MapContext.moveToLocation", SubMode::ForgottenScope},
      {"MapContext.getCenterLocation", SubMode::ForgottenScope},
      {"my.chooseCity", SubMode::ParameterLeak},
      {"wx.choosePoi", SubMode::InvalidSetting},
  };
  std::size_t false_pos = 0;
  for (const auto& g : got) false_pos += expected.count(g) ? 0 : 1;
  v.require(got == expected, std::to_string(false_pos) + " unexpected classification(s)");
  if (v.pass) v.detail = "5/5 rows, 0 false positives";
  return v;
}

Verdict falsifiability() {
  Verdict v;
  const std::vector<std::tuple<VulnCategory, std::string, std::string>> pairs{
      {VulnCategory::V1_CacheReuse, "wechat-android", "wechat-android-patched"},
      {VulnCategory::V2_PelApi, "wechat-android", "wechat-android-patched"},
      {VulnCategory::V3_StealthTransfer, "alipay-android", "alipay-android-patched"},
      {VulnCategory::V4_PermissionMgmt, "toutiao-android", "toutiao-android-patched"},
      {VulnCategory::V5_WebviewBypass, "alipay-android", "alipay-android-patched"},
      {VulnCategory::V6_EnvDivergence, "wechat-android", "wechat-android-patched"},
  };
  double slowest = 0;
  for (const auto& [cat, vulnerable, patched] : pairs) {
    for (const auto& [key, want] : {std::pair{vulnerable, true}, std::pair{patched, false}}) {
      const auto start = Clock::now();
      const bool found = has(suite_findings(key), cat);
      const double elapsed = seconds_since(start);
      slowest = std::max(slowest, elapsed);
      v.require(found == want, std::string(short_name(cat)) + " on " + key);
      v.require(elapsed < kRunLimitSeconds, key + " took " + std::to_string(elapsed) + " s");
    }
  }
  if (v.pass) v.detail = "12/12 runs, slowest " + std::to_string(slowest) + " s";
  return v;
}

Verdict textual_facts() {
  Verdict v;
  const auto wechat = suite_findings("wechat-android");
  const auto qq = suite_findings("qq-android");
  const auto toutiao = suite_findings("toutiao-android");
  const auto alipay = suite_findings("alipay-android");
  const auto unionpay = suite_findings("unionpay-android");
  v.require(has(wechat, VulnCategory::V1_CacheReuse), "WeChat V1");
  v.require(!has(qq, VulnCategory::V1_CacheReuse), "QQ no V1");
  v.require(!has(toutiao, VulnCategory::V1_CacheReuse), "ByteDance no V1");
  v.require(has(toutiao, VulnCategory::V4_PermissionMgmt, SubMode::CannotDelete), "ByteDance CannotDelete");
  v.require(has(alipay, VulnCategory::V4_PermissionMgmt, SubMode::IncompleteRemoval), "Alipay IncompleteRemoval");
  v.require(has(unionpay, VulnCategory::V4_PermissionMgmt, SubMode::SettingDisappears), "UnionPay SettingDisappears");
  v.require(has(alipay, VulnCategory::V5_WebviewBypass, SubMode::HostLayerIgnored), "Alipay HostLayerIgnored");
  v.require(has(wechat, VulnCategory::V5_WebviewBypass, SubMode::BothLayersIgnored), "WeChat BothLayersIgnored");

  std::set<std::string> silent, toast, blocking;
  const std::vector<OsEnvProfile> envs{bundled_env("android-generic"), bundled_env("ios14")};
  for (const auto& p : bundled_profiles()) {
    if (p.platform != Platform::Android) continue;
    const std::string host = p.host_id == "toutiao-lite" ? "toutiao" : p.host_id;
    const bool diverges = !detect_env_divergence(suite_scenario(p.key(), "clipboard-read"), envs, p).empty();
    if (diverges) {
      silent.insert(host);
    } else if (p.clipboard_prompt_mode == ClipboardPromptMode::Toast) {
      toast.insert(host);
    } else if (p.clipboard_prompt_mode == ClipboardPromptMode::BlockingPrompt) {
      blocking.insert(host);
    }
  }
  v.require(silent.size() == 6 && toast.size() == 1 && blocking.size() == 1,
            "clipboard split " + std::to_string(silent.size()) + "/" + std::to_string(toast.size()) + "/" +
                std::to_string(blocking.size()));
  if (v.pass) v.detail = "8/8 host facts; clipboard split 6 silent / 1 toast / 1 blocking";
  return v;
}

struct CorpusRun {
  testing::PlantedCorpus corpus;
  std::vector<PackageReport> reports;
  double seconds = 0;
};

Verdict scanner_accuracy(const CorpusRun& run) {
  Verdict v;
  std::size_t planted = 0, extracted = 0, true_pos = 0, unresolved_planted = 0, unresolved_found = 0;
  for (std::size_t i = 0; i < run.corpus.packages.size(); ++i) {
    const auto& truth = run.corpus.packages[i].sites;
    const auto& got = run.reports[i].call_sites;
    for (const auto& s : truth) {
      if (s.call_form == CallForm::Unresolved) {
        ++unresolved_planted;
      } else {
        ++planted;
        if (std::find(got.begin(), got.end(), s) != got.end()) ++true_pos;
      }
    }
    for (const auto& s : got) {
      if (s.call_form == CallForm::Unresolved) {
        ++unresolved_found;
      } else {
        ++extracted;
      }
    }
    v.require(got == truth, "site list differs in " + run.corpus.packages[i].id);
  }
  const double precision = extracted ? static_cast<double>(true_pos) / static_cast<double>(extracted) : 0.0;
  const double recall = planted ? static_cast<double>(true_pos) / static_cast<double>(planted) : 0.0;
  v.require(run.corpus.packages.size() >= 100, "fewer than 100 packages");
  v.require(planted >= 500, "fewer than 500 planted sites");
  v.require(precision == 1.0 && recall == 1.0, "precision " + std::to_string(precision) + " recall " +
                                                   std::to_string(recall));
  v.require(unresolved_found == unresolved_planted, "unresolved count differs");
  v.require(run.seconds < kCorpusLimitSeconds, "scan took " + std::to_string(run.seconds) + " s");
  if (v.pass) {
    std::ostringstream d;
    d << run.corpus.packages.size() << " packages, " << planted << " sites, " << unresolved_planted
      << " unresolved; precision=recall=1.0; scan " << run.seconds << " s";
    v.detail = d.str();
  }
  return v;
}

Verdict stats_accuracy(const CorpusRun& run) {
  Verdict v;
  const auto stats = corpus_stats(run.reports, "wx.getClipboardData");
  const auto quotas = testing::default_quotas();
  v.require(stats.categories.size() == quotas.size(), "category count differs");
  for (std::size_t i = 0; v.pass && i < quotas.size(); ++i) {
    const auto& s = stats.categories[i];
    const auto& q = quotas[i];
    const double planted = static_cast<double>(q.with_clipboard) / static_cast<double>(q.packages);
    v.require(s.category == q.name && s.total == q.packages && s.with_api == q.with_clipboard,
              q.name + " counts differ");
    v.require(std::fabs(s.proportion - planted) <= kProportionTolerance, q.name + " proportion differs");
    v.require(s.with_api <= s.total && s.proportion >= 0.0 && s.proportion <= 1.0, q.name + " out of range");
  }
  v.require(stats.overall.with_api <= stats.overall.total, "overall numerator exceeds denominator");
  if (v.pass) v.detail = std::to_string(quotas.size()) + " categories reproduce planted rates exactly";
  return v;
}

Verdict determinism(const fs::path& corpus_root) {
  Verdict v;
  const std::string root = corpus_root.string();
  const std::string index = (corpus_root / "index.json").string();
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--profile", "wechat-android", "--scenario", "three-cases"},
      {"detect", "--profile", "wechat-android"},
      {"scan", root},
      {"stats", root, "--corpus-index", index},
  };
  for (const auto& args : commands) {
    std::ostringstream a, b, err;
    const int ca = cli::run(args, a, err);
    const int cb = cli::run(args, b, err);
    v.require(ca != cli::kExitError && ca == cb && a.str() == b.str() && !a.str().empty(),
              args[0] + " output differs between runs");
  }
  if (v.pass) v.detail = "simulate, detect, scan, stats byte-identical on rerun";
  return v;
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, std::function<Verdict()>>> criteria;
  testing::TempDir tmp("miniperm-acceptance");
  CorpusRun corpus_run;

  criteria.emplace_back("three-case conformance", three_cases);
  criteria.emplace_back("truth-table oracle", truth_table);
  criteria.emplace_back("PEL API table reproduction", pel_table);
  criteria.emplace_back("per-category falsifiability", falsifiability);
  criteria.emplace_back("host textual facts", textual_facts);
  criteria.emplace_back("scanner precision/recall", [&] {
    corpus_run.corpus = testing::generate_corpus(kCorpusSeed, testing::default_quotas());
    testing::write_corpus(corpus_run.corpus, tmp.path());
    const auto registry = registry_of(bundled_profile("wechat-android"));
    const auto index = load_corpus_index(tmp.path() / "index.json");
    const auto start = Clock::now();
    for (const auto& dir : discover_packages(tmp.path())) {
      auto r = scan_package(dir, registry);
      r.category = index.at(r.package_id);
      corpus_run.reports.push_back(std::move(r));
    }
    corpus_run.seconds = seconds_since(start);
    return scanner_accuracy(corpus_run);
  });
  criteria.emplace_back("stats correctness", [&] { return stats_accuracy(corpus_run); });
  criteria.emplace_back("determinism", [&] { return determinism(tmp.path()); });

  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << "  (" << v.detail << ")\n";
    failed += v.pass ? 0 : 1;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
