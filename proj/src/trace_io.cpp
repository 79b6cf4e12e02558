#include "miniperm/trace_io.hpp"

#include <sstream>

#include "json_util.hpp"
#include "miniperm/error.hpp"

namespace miniperm {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

template <typename T, typename F>
void put(ordered_json& j, const char* key, const std::optional<T>& v, F render) {
  if (v) j[key] = render(*v);
}

void put(ordered_json& j, const char* key, const std::string& v) {
  if (!v.empty()) j[key] = v;
}

auto name = [](auto v) { return std::string(to_string(v)); };

template <typename T, typename F>
std::optional<T> opt(const json& j, const char* key, F parse) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  return parse(it->get<std::string>());
}

std::string str(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? std::string() : it->get<std::string>();
}

}  // namespace

ordered_json event_to_json(const TraceEvent& e) {
  const auto& p = e.payload;
  ordered_json j;
  j["seq"] = e.seq;
  j["kind"] = to_string(e.kind);
  put(j, "layer", p.layer, name);
  put(j, "mini_program", p.mini_program);
  put(j, "vendor", p.vendor);
  put(j, "api", p.api);
  put(j, "scope", p.scope, [](const ScopeId& s) { return s.str(); });
  put(j, "data_class", p.data_class, name);
  put(j, "channel", p.channel, name);
  put(j, "user_choice", p.user_choice, name);
  put(j, "grant", p.grant, name);
  put(j, "host_grant", p.host_grant, name);
  put(j, "os_grant", p.os_grant, name);
  put(j, "case_path", p.case_path, name);
  put(j, "route", p.route, name);
  put(j, "blocking", p.blocking, [](bool b) { return b; });
  put(j, "user_selected", p.user_selected, [](bool b) { return b; });
  put(j, "call", p.call, [](std::uint64_t s) { return s; });
  put(j, "path", p.path);
  if (!p.retained.empty()) {
    ordered_json arr = ordered_json::array();
    for (auto c : p.retained) arr.push_back(to_string(c));
    j["retained"] = std::move(arr);
  }
  put(j, "env", p.env);
  return j;
}

TraceEvent event_from_json(const json& j) {
  try {
    TraceEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    auto& p = e.payload;
    p.layer = opt<Layer>(j, "layer", parse_layer);
    p.mini_program = str(j, "mini_program");
    p.vendor = str(j, "vendor");
    p.api = str(j, "api");
    p.scope = opt<ScopeId>(j, "scope", [](const std::string& s) { return ScopeId(s); });
    p.data_class = opt<DataClass>(j, "data_class", parse_data_class);
    p.channel = opt<Channel>(j, "channel", parse_channel);
    p.user_choice = opt<UserChoice>(j, "user_choice", parse_user_choice);
    p.grant = opt<GrantValue>(j, "grant", parse_grant_value);
    p.host_grant = opt<GrantValue>(j, "host_grant", parse_grant_value);
    p.os_grant = opt<GrantValue>(j, "os_grant", parse_grant_value);
    p.case_path = opt<CasePath>(j, "case_path", parse_case_path);
    if (auto it = j.find("route"); it != j.end()) {
      const auto r = it->get<std::string>();
      for (auto route : {ReleaseRoute::Scope, ReleaseRoute::Interaction, ReleaseRoute::Background,
                         ReleaseRoute::ParamLeak, ReleaseRoute::WebviewBridge,
                         ReleaseRoute::VendorTrust, ReleaseRoute::SharedLogin,
                         ReleaseRoute::Clipboard}) {
        if (to_string(route) == r) p.route = route;
      }
      if (!p.route) throw Error(ErrorCode::InvalidArgument, "unknown route '" + r + "'");
    }
    if (auto it = j.find("blocking"); it != j.end()) p.blocking = it->get<bool>();
    if (auto it = j.find("user_selected"); it != j.end()) p.user_selected = it->get<bool>();
    if (auto it = j.find("call"); it != j.end()) p.call = it->get<std::uint64_t>();
    p.path = str(j, "path");
    if (auto it = j.find("retained"); it != j.end()) {
      for (const auto& c : *it) p.retained.push_back(parse_data_class(c.get<std::string>()));
    }
    p.env = str(j, "env");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::SchemaViolation, std::string("trace event: ") + ex.what());
  }
}

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  for (const auto& e : trace) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

Trace trace_from_jsonl(std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    trace.push_back(event_from_json(detail::parse_json(line, "trace line " + std::to_string(line_no))));
  }
  return trace;
}

}  // namespace miniperm
