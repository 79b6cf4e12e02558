#include "doctest.h"

#include <algorithm>
#include <set>

#include "miniperm/error.hpp"
#include "miniperm/profile.hpp"
#include "miniperm/scenario.hpp"
#include "miniperm/trace_io.hpp"
#include "miniperm/world.hpp"
#include "support/truth_table.hpp"

using namespace miniperm;

namespace {

const ScopeId kLocation{"scope.userLocation"};
const ScopeId kRecord{"scope.record"};
const ScopeId kCamera{"scope.camera"};

std::size_t count_kind(const Trace& t, EventKind kind) {
  return static_cast<std::size_t>(
      std::count_if(t.begin(), t.end(), [&](const TraceEvent& e) { return e.kind == kind; }));
}

std::size_t count_kind(const std::vector<TraceEvent>& t, EventKind kind, Layer layer) {
  return static_cast<std::size_t>(std::count_if(
      t.begin(), t.end(), [&](const TraceEvent& e) { return e.kind == kind && e.payload.layer == layer; }));
}

Scenario suite_scenario(const std::string& profile, const std::string& name) {
  for (auto& s : bundled_suite(profile)) {
    if (s.name == name) return s;
  }
  FAIL("missing scenario " << name);
  return {};
}

}  // namespace

TEST_CASE("new world starts empty") {
  const auto& wechat = bundled_profile("wechat-android");
  World w = World::create(wechat, {{DataClass::Location, GrantValue::Granted}});
  CHECK(w.trace().empty());
  CHECK(w.mini_programs().empty());
  CHECK(w.grants().empty());
  CHECK(w.account_epoch() == 0);
  CHECK(std::count_if(w.os_grants().begin(), w.os_grants().end(),
                      [](const auto& kv) { return kv.second.state != GrantValue::Unset; }) == 1);
  CHECK(w.os_grant(DataClass::Location) == GrantValue::Granted);

  World q = World::create(bundled_profile("qq-android"));
  CHECK(q.os_grant(DataClass::Camera) == GrantValue::Unset);

  try {
    World::create(wechat, {{DataClass::None, GrantValue::Granted}});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("request_scope follows the three cases") {
  const auto& wechat = bundled_profile("wechat-android");

  SUBCASE("both allow") {
    World w = World::create(wechat);
    w.launch("tesla", "tesla");
    auto out = w.request_scope("tesla", kLocation, UserChoice::Allow, UserChoice::Allow);
    CHECK(out.case_path == CasePath::BothAllow);
    CHECK(out.prompts_shown.size() == 2);
    CHECK(w.grant("tesla", kLocation).state == GrantValue::Granted);

    auto again = w.request_scope("tesla", kLocation, UserChoice::Deny, UserChoice::Deny);
    CHECK(again.case_path == CasePath::BothAllow);
    CHECK(again.prompts_shown.empty());
    CHECK(count_kind(again.new_events, EventKind::PromptShown, Layer::Host) == 0);
  }

  SUBCASE("host rejects") {
    World w = World::create(wechat, {{DataClass::Microphone, GrantValue::Granted}});
    w.launch("tesla", "tesla");
    auto out = w.request_scope("tesla", kRecord, UserChoice::Deny, UserChoice::Allow);
    CHECK(out.case_path == CasePath::HostRejectOsAllow);
    CHECK_FALSE(out.released.has_value());
    CHECK(out.fail_reason.has_value());
    CHECK(w.grant("tesla", kRecord).state == GrantValue::Denied);
  }

  SUBCASE("os rejects") {
    World w = World::create(wechat, {{DataClass::Camera, GrantValue::Denied}});
    w.launch("tesla", "tesla");
    auto out = w.request_scope("tesla", kCamera, UserChoice::Allow, UserChoice::Allow);
    CHECK(out.case_path == CasePath::OsReject);
    CHECK(out.prompts_shown.empty());
    CHECK(w.grant("tesla", kCamera).state == GrantValue::Unset);
  }

  SUBCASE("preconditions") {
    World w = World::create(wechat);
    CHECK_THROWS_AS(w.request_scope("ghost", kLocation, UserChoice::Allow, UserChoice::Allow), Error);
    w.launch("tesla", "tesla");
    try {
      w.request_scope("tesla", ScopeId("scope.nothing"), UserChoice::Allow, UserChoice::Allow);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownScope);
    }
    w.delete_mini_program("tesla");
    try {
      w.request_scope("tesla", kLocation, UserChoice::Allow, UserChoice::Allow);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MiniProgramDeleted);
    }
  }
}

TEST_CASE("host denial is sticky until revoked") {
  World w = World::create(bundled_profile("wechat-android"), {{DataClass::Location, GrantValue::Granted}});
  w.launch("m", "v");
  w.request_scope("m", kLocation, UserChoice::Deny, UserChoice::Allow);
  auto again = w.request_scope("m", kLocation, UserChoice::Allow, UserChoice::Allow);
  CHECK(again.prompts_shown.empty());
  CHECK(again.case_path == CasePath::HostRejectOsAllow);
  CHECK(w.grant("m", kLocation).state == GrantValue::Denied);
}

TEST_CASE("golden three-case scenario") {
  const auto& wechat = bundled_profile("wechat-android");
  const auto scenario = suite_scenario("wechat-android", "three-cases");
  const auto run = run_scenario(wechat, scenario);
  CHECK(run.case_paths() ==
        std::vector<CasePath>{CasePath::BothAllow, CasePath::HostRejectOsAllow, CasePath::OsReject});
}

TEST_CASE("call_api examples") {
  SUBCASE("searchContacts leaks without a host grant") {
    World w = World::create(bundled_profile("wechat-android"), {{DataClass::Contacts, GrantValue::Granted}});
    w.launch("m", "v");
    auto out = w.call_api("m", "wx.searchContacts");
    REQUIRE(out.released.has_value());
    CHECK(*out.released == DataClass::Contacts);
    CHECK(out.case_path == CasePath::HostRejectOsAllow);
    CHECK(w.grant("m", ScopeId("scope.userLocation")).state == GrantValue::Unset);
  }

  SUBCASE("chooseCity leaks location through a parameter") {
    World w = World::create(bundled_profile("alipay-android"), {{DataClass::Location, GrantValue::Granted}});
    w.launch("m", "v");
    w.request_scope("m", kLocation, UserChoice::Deny, UserChoice::Allow);
    REQUIRE(w.grant("m", kLocation).state == GrantValue::Denied);
    auto out = w.call_api("m", "my.chooseCity", {{"showLocatedCity", true}}, Channel::Direct,
                          Interaction{"Hangzhou"});
    REQUIRE(out.released.has_value());
    CHECK(*out.released == DataClass::Location);
    CHECK(out.case_path == CasePath::ParamLeak);

    auto plain = w.call_api("m", "my.chooseCity", {{"showLocatedCity", false}}, Channel::Direct,
                            Interaction{"Hangzhou"});
    CHECK(plain.case_path != CasePath::ParamLeak);
  }

  SUBCASE("interaction-gated picker needs an interaction") {
    World w = World::create(bundled_profile("wechat-android"), {{DataClass::Album, GrantValue::Granted}});
    w.launch("m", "v");
    CHECK_FALSE(w.call_api("m", "wx.chooseImage").released.has_value());
    CHECK(w.call_api("m", "wx.chooseImage", {}, Channel::Direct, Interaction{"photo-1"}).released ==
          DataClass::Album);
  }

  SUBCASE("errors") {
    World w = World::create(bundled_profile("wechat-android"));
    w.launch("m", "v");
    try {
      w.call_api("m", "wx.nothing");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownApi);
    }
    try {
      w.call_api("m", "wx.searchContacts", {}, Channel::Webview);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ChannelUnsupported);
    }
    w.delete_mini_program("m");
    CHECK_THROWS_AS(w.call_api("m", "wx.getLocation"), Error);
  }

  SUBCASE("os grant unset at call time blocks a background leak") {
    World w = World::create(bundled_profile("wechat-android"));
    w.launch("m", "v");
    CHECK_FALSE(w.call_api("m", "wx.searchContacts").released.has_value());
  }
}

TEST_CASE("truth table matches the hand-written oracle") {
  const auto cells = testing::all_cells();
  REQUIRE(cells.size() == 24);
  for (const auto& c : cells) {
    CAPTURE(c.label());
    CHECK(testing::simulate_release(c) == testing::oracle_release(c));
  }
}

TEST_CASE("release under a host denial happens only on the leak paths") {
  for (const auto& c : testing::all_cells()) {
    if (c.host != GrantValue::Denied) continue;
    CAPTURE(c.label());
    const bool leak_path = !c.enforced && c.background && c.os == GrantValue::Granted;
    CHECK(testing::simulate_release(c) == leak_path);
  }
}

TEST_CASE("revoke_scope") {
  SUBCASE("normal path") {
    World w = World::create(bundled_profile("wechat-android"));
    w.launch("m", "v");
    w.request_scope("m", kLocation, UserChoice::Allow, UserChoice::Allow);
    w.revoke_scope("m", kLocation);
    CHECK(w.grant("m", kLocation).state == GrantValue::Denied);
    CHECK(w.trace().back().kind == EventKind::GrantChanged);
  }
  SUBCASE("missing settings page") {
    World w = World::create(bundled_profile("unionpay-android"));
    w.launch("m", "v");
    w.request_scope("m", kLocation, UserChoice::Allow, UserChoice::Allow);
    try {
      w.revoke_scope("m", kLocation);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SettingsUnavailable);
    }
    CHECK(w.grant("m", kLocation).state == GrantValue::Granted);
  }
  SUBCASE("no grant") {
    World w = World::create(bundled_profile("wechat-android"));
    w.launch("m", "v");
    try {
      w.revoke_scope("m", kLocation);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoSuchGrant);
    }
  }
}

TEST_CASE("delete_mini_program per host") {
  auto granted_then_deleted = [](const std::string& key) {
    World w = World::create(bundled_profile(key));
    w.launch("m", "v");
    w.request_scope("m", kLocation, UserChoice::Allow, UserChoice::Allow);
    w.cache_file("m", "tmp/a.jpg");
    w.delete_mini_program("m");
    return w;
  };
  SUBCASE("grants survive") {
    auto w = granted_then_deleted("toutiao-android");
    CHECK(w.grant("m", kLocation).state == GrantValue::Granted);
  }
  SUBCASE("identity retained") {
    World w = World::create(bundled_profile("alipay-android"));
    w.launch("m", "v");
    w.request_scope("m", ScopeId("scope.userInfo"), UserChoice::Allow, UserChoice::Allow);
    w.call_api("m", "my.getOpenUserInfo");
    w.delete_mini_program("m");
    CHECK(w.grants().empty());
    REQUIRE(w.retained_identity_data().count("m") == 1);
    CHECK(w.retained_identity_data().at("m").count(DataClass::Identity) == 1);
  }
  SUBCASE("clean") {
    auto w = granted_then_deleted("wechat-android");
    CHECK(w.grants().empty());
    CHECK(w.retained_identity_data().empty());
    CHECK(w.cached_paths("m").empty());
  }
  SUBCASE("twice") {
    auto w = granted_then_deleted("wechat-android");
    try {
      w.delete_mini_program("m");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AlreadyDeleted);
    }
  }
}

TEST_CASE("close and reopen") {
  SUBCASE("cache survives") {
    World w = World::create(bundled_profile("wechat-android"));
    w.launch("m", "v");
    w.cache_file("m", "tmp/a.jpg");
    w.close_mini_program("m");
    w.reopen_mini_program("m");
    CHECK(w.access_file("m", "tmp/a.jpg"));
    CHECK(w.trace().back().kind == EventKind::FileReused);
  }
  SUBCASE("cache cleared") {
    World w = World::create(bundled_profile("qq-android"));
    w.launch("m", "v");
    w.cache_file("m", "tmp/a.jpg");
    w.close_mini_program("m");
    w.reopen_mini_program("m");
    CHECK(w.cached_paths("m").empty());
    CHECK_FALSE(w.access_file("m", "tmp/a.jpg"));
    CHECK(count_kind(w.trace(), EventKind::FileReused) == 0);
  }
  SUBCASE("reopen after delete") {
    World w = World::create(bundled_profile("wechat-android"));
    w.launch("m", "v");
    w.delete_mini_program("m");
    CHECK_THROWS_AS(w.reopen_mini_program("m"), Error);
  }
}

TEST_CASE("switch_account resets grants") {
  World w = World::create(bundled_profile("wechat-android"));
  w.switch_account();
  CHECK(w.account_epoch() == 1);

  w.launch("m", "v");
  w.request_scope("m", kLocation, UserChoice::Allow, UserChoice::Allow);
  w.request_scope("m", kRecord, UserChoice::Allow, UserChoice::Allow);
  w.request_scope("m", kCamera, UserChoice::Allow, UserChoice::Allow);
  w.switch_account();
  CHECK(w.account_epoch() == 2);
  for (const auto& [key, g] : w.grants()) CHECK(g.state == GrantValue::Unset);
  auto again = w.request_scope("m", kLocation, UserChoice::Allow, UserChoice::Allow);
  CHECK(count_kind(again.new_events, EventKind::PromptShown, Layer::Host) == 1);
}

TEST_CASE("read_clipboard per env") {
  const auto& wechat = bundled_profile("wechat-android");
  auto read = [&](const std::string& env, UserChoice answer) {
    World w = World::create(wechat);
    w.launch("m", "v");
    return w.read_clipboard("m", bundled_env(env), answer);
  };

  auto silent = read("android-generic", UserChoice::Allow);
  CHECK(silent.released == DataClass::Clipboard);
  CHECK(silent.prompts_shown.empty());

  auto toast = read("ios14", UserChoice::Deny);
  CHECK(toast.released == DataClass::Clipboard);
  REQUIRE(toast.prompts_shown.size() == 1);
  CHECK_FALSE(toast.prompts_shown[0].blocking);

  CHECK_FALSE(read("miui12", UserChoice::Deny).released.has_value());
  CHECK(read("miui12", UserChoice::Allow).released == DataClass::Clipboard);

  World w = World::create(fixture_profile("alipay-android-10.2.26"));
  w.launch("m", "v");
  auto leaky = w.read_clipboard("m", bundled_env("android-generic"), UserChoice::Deny);
  CHECK(leaky.released == DataClass::Clipboard);
  const auto& ev = leaky.new_events;
  auto released = std::find_if(ev.begin(), ev.end(), [](const TraceEvent& e) { return e.kind == EventKind::DataReleased; });
  auto answered =
      std::find_if(ev.begin(), ev.end(), [](const TraceEvent& e) { return e.kind == EventKind::PromptAnswered; });
  REQUIRE(released != ev.end());
  REQUIRE(answered != ev.end());
  CHECK(released->seq < answered->seq);
}

TEST_CASE("effective clipboard mode is the stronger one") {
  CHECK(effective_clipboard_mode(ClipboardPromptMode::NoPrompt, ClipboardPromptMode::Toast) ==
        ClipboardPromptMode::Toast);
  CHECK(effective_clipboard_mode(ClipboardPromptMode::BlockingPrompt, ClipboardPromptMode::NoPrompt) ==
        ClipboardPromptMode::BlockingPrompt);
}

TEST_CASE("trace properties over every bundled suite") {
  for (const auto& profile : bundled_profiles()) {
    for (const auto& scenario : bundled_suite(profile.suite_key())) {
      CAPTURE(profile.key());
      CAPTURE(scenario.name);
      const auto first = run_scenario(profile, scenario);
      const auto& t = first.world.trace();

      std::map<std::uint64_t, const TraceEvent*> calls;
      std::uint64_t prev = 0;
      for (const auto& e : t) {
        CHECK(e.seq > prev);
        prev = e.seq;
        if (e.kind == EventKind::ApiCalled) calls[e.seq] = &e;
        if (e.kind == EventKind::DataReleased) {
          REQUIRE(e.payload.call.has_value());
          REQUIRE(calls.count(*e.payload.call) == 1);
          CHECK(calls.at(*e.payload.call)->payload.case_path != CasePath::OsReject);
        }
      }

      const auto second = run_scenario(profile, scenario);
      CHECK(trace_to_jsonl(t) == trace_to_jsonl(second.world.trace()));
    }
  }
}

TEST_CASE("trace jsonl round trip") {
  const auto& wechat = bundled_profile("wechat-android");
  for (const auto& scenario : bundled_suite("wechat-android")) {
    const auto run = run_scenario(wechat, scenario);
    const auto text = trace_to_jsonl(run.world.trace());
    CHECK(trace_from_jsonl(text) == run.world.trace());
  }
}

TEST_CASE("scenario documents") {
  const std::string steps = R"([
    {"op": "launch", "mini_program": "m"},
    {"op": "request_scope", "mini_program": "m", "scope": "scope.userLocation", "user": {"host": "allow", "os": "allow"}}
  ])";
  auto bare = parse_scenarios(steps, "bare");
  REQUIRE(bare.size() == 1);
  CHECK(bare[0].steps.size() == 2);

  auto single = parse_scenarios(R"({"name": "one", "steps": )" + steps + "}", "single");
  REQUIRE(single.size() == 1);
  CHECK(single[0].name == "one");

  auto suite = parse_scenarios(R"({"scenarios": [{"name": "a", "steps": []}, {"name": "b", "steps": []}]})", "suite");
  CHECK(suite.size() == 2);

  CHECK_THROWS_AS(parse_scenarios(R"([{"op": "dance"}])", "bad"), Error);
  CHECK_THROWS_AS(parse_scenarios("[", "broken"), Error);
}

TEST_CASE("expected step errors do not abort the run") {
  auto scenarios = parse_scenarios(R"([
    {"op": "launch", "mini_program": "m"},
    {"op": "revoke_scope", "mini_program": "m", "scope": "scope.userLocation", "expect_error": "NoSuchGrant"},
    {"op": "call_api", "mini_program": "m", "api": "wx.getLocation"}
  ])", "expect");
  const auto run = run_scenario(bundled_profile("wechat-android"), scenarios.at(0));
  REQUIRE(run.results.size() == 3);
  CHECK(run.results[1].error == ErrorCode::NoSuchGrant);

  auto failing = parse_scenarios(R"([
    {"op": "revoke_scope", "mini_program": "ghost", "scope": "scope.userLocation"}
  ])", "unexpected");
  CHECK_THROWS_AS(run_scenario(bundled_profile("wechat-android"), failing.at(0)), Error);
}

TEST_CASE("enum parsing ignores case") {
  CHECK(parse_data_class("location") == DataClass::Location);
  CHECK(parse_grant_value("GRANTED") == GrantValue::Granted);
  CHECK(parse_category("V2") == VulnCategory::V2_PelApi);
  CHECK(parse_category("v6_envdivergence") == VulnCategory::V6_EnvDivergence);
  try {
    parse_channel("carrier-pigeon");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
  CHECK_FALSE(is_os_gated(DataClass::Clipboard));
  CHECK(is_os_gated(DataClass::Location));
}
