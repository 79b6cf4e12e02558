#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "miniperm/world.hpp"

namespace miniperm {

/// Fixed field order: seq, kind, then payload fields in declaration order.
/// Empty payload fields are omitted.
nlohmann::ordered_json event_to_json(const TraceEvent& event);
TraceEvent event_from_json(const nlohmann::json& j);

/// One event per line, each line terminated by '\n'.
std::string trace_to_jsonl(const Trace& trace);
Trace trace_from_jsonl(std::string_view text);

}  // namespace miniperm
