#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "miniperm/cli.hpp"
#include "support/planted_corpus.hpp"

namespace fs = std::filesystem;
using miniperm::cli::kExitClean;
using miniperm::cli::kExitError;
using miniperm::cli::kExitFindings;

namespace {

const fs::path kFixtures = MINIPERM_FIXTURE_DIR;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = miniperm::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<nlohmann::json> jsonl(const std::string& text) {
  std::vector<nlohmann::json> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  }
  return lines;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("simulate three-cases") {
  const auto r = run({"simulate", "--profile", "wechat-android", "--scenario", "three-cases"});
  REQUIRE(r.code == kExitClean);
  std::vector<std::string> paths;
  for (const auto& e : jsonl(r.out)) {
    CHECK(e["scenario"] == "three-cases");
    if (e["kind"] == "ApiCalled" && e.contains("case_path")) paths.push_back(e["case_path"]);
  }
  CHECK(paths == std::vector<std::string>{"BothAllow", "HostRejectOsAllow", "OsReject"});
  CHECK(run({"simulate", "--profile", "wechat-android", "--scenario", "three-cases"}).out == r.out);
}

TEST_CASE("simulate from a scenario file") {
  miniperm::testing::TempDir tmp("miniperm-cli");
  const auto path = tmp.path() / "steps.json";
  std::ofstream(path) << R"({"name": "contacts", "os_grants": {"Contacts": "Granted"}, "steps": [
    {"op": "launch", "mini_program": "m"},
    {"op": "call_api", "mini_program": "m", "api": "wx.searchContacts"}
  ]})";
  const auto r = run({"simulate", "--profile", "wechat-android", "--scenario", path.string()});
  CHECK(r.code == kExitClean);
  const auto events = jsonl(r.out);
  REQUIRE(events.size() == 2);
  CHECK(events[1]["kind"] == "DataReleased");
  CHECK(events[1]["data_class"] == "Contacts");
}

TEST_CASE("usage errors exit 2") {
  const auto missing = run({"simulate", "--profile", "wechat-android"});
  CHECK(missing.code == kExitError);
  CHECK(missing.err.find("--scenario") != std::string::npos);

  CHECK(run({}).code == kExitError);
  CHECK(run({"frobnicate"}).code == kExitError);
  CHECK(run({"detect", "--profile", "no-such-host"}).code == kExitError);
  CHECK(run({"detect", "--profile", "wechat-android", "--format", "yaml"}).code == kExitError);
  CHECK(run({"scan", (kFixtures / "packages/does-not-exist").string()}).code == kExitError);
  CHECK(run({"stats", (kFixtures / "packages/corpus").string()}).code == kExitError);
  CHECK(run({"--help"}).code == kExitClean);
}

TEST_CASE("malformed inputs exit 2 with a message") {
  miniperm::testing::TempDir tmp("miniperm-cli");
  const auto bad = tmp.path() / "bad.json";
  std::ofstream(bad) << "[{\"op\": ";
  const auto r = run({"simulate", "--profile", "wechat-android", "--scenario", bad.string()});
  CHECK(r.code == kExitError);
  CHECK(r.err.find("ParseError") != std::string::npos);

  const auto violating = tmp.path() / "violating.json";
  std::ofstream(violating) << R"([{"op": "launch", "mini_program": "m"}, {"op": "reopen", "mini_program": "m"}])";
  const auto v = run({"simulate", "--profile", "wechat-android", "--scenario", violating.string()});
  CHECK(v.code == kExitError);
  CHECK(v.err.find("step 1") != std::string::npos);
}

TEST_CASE("detect exit codes") {
  const auto vulnerable = run({"detect", "--profile", "wechat-android"});
  CHECK(vulnerable.code == kExitFindings);
  const auto j = nlohmann::json::parse(vulnerable.out);
  std::set<std::string> cats;
  for (const auto& f : j["findings"]) cats.insert(f["category"]);
  CHECK(cats.count("V1_CacheReuse") == 1);
  CHECK(cats.count("V2_PelApi") == 1);

  const auto patched = run({"detect", "--profile", "wechat-android-patched"});
  CHECK(patched.code == kExitClean);
  CHECK(nlohmann::json::parse(patched.out)["findings"].empty());
}

TEST_CASE("detect with two envs reports clipboard divergence") {
  const auto r = run({"detect", "--profile", "qq-android", "--scenario", "clipboard-read", "--env", "ios14", "--env",
                      (kFixtures / "envs/android-generic.json").string()});
  CHECK(r.code == kExitFindings);
  const auto j = nlohmann::json::parse(r.out);
  bool v6 = false;
  for (const auto& f : j["findings"]) v6 = v6 || f["category"] == "V6_EnvDivergence";
  CHECK(v6);
}

TEST_CASE("formats carry the same findings") {
  const auto json = run({"detect", "--profile", "alipay-android"});
  const auto text = run({"detect", "--profile", "alipay-android", "--format", "text"});
  const auto md = run({"detect", "--profile", "alipay-android", "--format", "md"});
  CHECK(json.code == text.code);
  CHECK(json.code == md.code);
  const auto findings = nlohmann::json::parse(json.out)["findings"];
  CHECK(text.out.find(std::to_string(findings.size()) + " finding(s)") != std::string::npos);
  for (const auto& f : findings) {
    const std::string sub = f["sub_mode"].is_null() ? "" : f["sub_mode"].get<std::string>();
    CHECK(text.out.find(sub) != std::string::npos);
    CHECK(md.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("--out writes the report to a file") {
  miniperm::testing::TempDir tmp("miniperm-cli");
  const auto path = tmp.path() / "matrix.md";
  const auto r = run({"matrix", "--format", "md", "--out", path.string()});
  CHECK(r.out.empty());
  CHECK(read_file(path).find("| wechat |") != std::string::npos);
}

TEST_CASE("scan and stats") {
  const auto clip = run({"scan", (kFixtures / "packages/pkg-clipboard").string()});
  CHECK(clip.code == kExitFindings);
  const auto j = nlohmann::json::parse(clip.out);
  REQUIRE(j.size() == 1);
  CHECK(j[0]["matched"].size() == 1);

  const auto empty = run({"scan", (kFixtures / "packages/pkg-empty").string()});
  CHECK(empty.code == kExitClean);
  CHECK(nlohmann::json::parse(empty.out)[0]["call_sites"].empty());

  const auto stats = run({"stats", (kFixtures / "packages/corpus").string(), "--corpus-index",
                          (kFixtures / "packages/corpus/index.json").string(), "--format", "text"});
  CHECK(stats.code == kExitFindings);
  CHECK(stats.out.find("overall") != std::string::npos);
  CHECK(stats.out.find("0.5000") != std::string::npos);

  const auto again = run({"stats", (kFixtures / "packages/corpus").string(), "--corpus-index",
                          (kFixtures / "packages/corpus/index.json").string(), "--format", "text"});
  CHECK(again.out == stats.out);
}

TEST_CASE("matrix shapes") {
  const auto all = run({"matrix"});
  CHECK(all.code == kExitFindings);
  const auto j = nlohmann::json::parse(all.out);
  CHECK(j["rows"].size() == 9);
  CHECK(j["columns"].size() == 6);

  const auto one = run({"matrix", "--profile", "qq-android"});
  CHECK(nlohmann::json::parse(one.out)["rows"].size() == 1);

  miniperm::testing::TempDir tmp("miniperm-cli");
  const auto empty = tmp.path() / "empty.json";
  std::ofstream(empty) << R"({"scenarios": []})";
  const auto unknown =
      run({"matrix", "--profile", "qq-android", "--profile", "baidu-android", "--scenario", empty.string()});
  CHECK(unknown.code == kExitClean);
  for (const auto& row : nlohmann::json::parse(unknown.out)["rows"]) {
    for (const auto& [cat, cell] : row["cells"].items()) CHECK(cell == "Unknown|Unknown");
  }
}

TEST_CASE("the installed binary honors the exit-code contract") {
  auto status = [](const std::string& args) {
    const std::string cmd = std::string("\"") + MINIPERM_TOOL_PATH + "\" " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status("detect --profile wechat-android-patched") == 0);
  CHECK(status("detect --profile wechat-android") == 1);
  CHECK(status("simulate --profile wechat-android") == 2);
}
