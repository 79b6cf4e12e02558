#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace miniperm {

/// Fixture documents compiled into the library, keyed by path relative to
/// fixtures/ (e.g. "profiles/wechat-android.json").
const std::map<std::string, std::string_view>& embedded_fixtures();

std::optional<std::string_view> embedded_fixture(std::string_view relative_path);

}  // namespace miniperm
