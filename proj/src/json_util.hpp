#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace miniperm::detail {

using nlohmann::json;

/// Parses `text`; syntax errors become Error(ParseError) with line:column.
json parse_json(std::string_view text, std::string_view source);

std::string read_file(const std::filesystem::path& path);

/// Field accessors that name the offending path on schema violations.
class Fields {
 public:
  Fields(const json& object, std::string path, std::string_view source);

  bool has(const char* key) const;
  const json& at(const char* key) const;
  std::string string(const char* key) const;
  std::string string_or(const char* key, std::string fallback) const;
  bool boolean(const char* key) const;
  bool boolean_or(const char* key, bool fallback) const;
  const json& array(const char* key) const;
  const json& object(const char* key) const;

  std::string path(const char* key) const;
  std::string path(const char* key, std::size_t index) const;
  [[noreturn]] void fail(const std::string& field, const std::string& what) const;

 private:
  const json& object_;
  std::string path_;
  std::string source_;
};

[[noreturn]] void schema_fail(std::string_view source, const std::string& field,
                              const std::string& what);

}  // namespace miniperm::detail
