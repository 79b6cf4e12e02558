#include "json_util.hpp"

#include <fstream>
#include <sstream>

#include "miniperm/error.hpp"

namespace miniperm::detail {

namespace {

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

std::string type_name(const json& j) { return j.type_name(); }

}  // namespace

json parse_json(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, col] = line_col(text, e.byte);
    std::string what = e.what();
    // Strip the library's "[json.exception.parse_error.101] " prefix.
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    throw Error(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(line) + ":" +
                                           std::to_string(col) + ": " + what);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void schema_fail(std::string_view source, const std::string& field, const std::string& what) {
  throw Error(ErrorCode::SchemaViolation,
              std::string(source) + ": field '" + field + "': " + what);
}

Fields::Fields(const json& object, std::string path, std::string_view source)
    : object_(object), path_(std::move(path)), source_(source) {
  if (!object_.is_object()) {
    schema_fail(source_, path_.empty() ? "<root>" : path_,
                "expected object, found " + type_name(object_));
  }
}

bool Fields::has(const char* key) const { return object_.contains(key); }

const json& Fields::at(const char* key) const {
  auto it = object_.find(key);
  if (it == object_.end()) fail(path(key), "required field missing");
  return *it;
}

std::string Fields::string(const char* key) const {
  const auto& v = at(key);
  if (!v.is_string()) fail(path(key), "expected string, found " + type_name(v));
  return v.get<std::string>();
}

std::string Fields::string_or(const char* key, std::string fallback) const {
  return has(key) ? string(key) : fallback;
}

bool Fields::boolean(const char* key) const {
  const auto& v = at(key);
  if (!v.is_boolean()) fail(path(key), "expected boolean, found " + type_name(v));
  return v.get<bool>();
}

bool Fields::boolean_or(const char* key, bool fallback) const {
  return has(key) ? boolean(key) : fallback;
}

const json& Fields::array(const char* key) const {
  const auto& v = at(key);
  if (!v.is_array()) fail(path(key), "expected array, found " + type_name(v));
  return v;
}

const json& Fields::object(const char* key) const {
  const auto& v = at(key);
  if (!v.is_object()) fail(path(key), "expected object, found " + type_name(v));
  return v;
}

std::string Fields::path(const char* key) const {
  return path_.empty() ? std::string(key) : path_ + "." + key;
}

std::string Fields::path(const char* key, std::size_t index) const {
  return path(key) + "[" + std::to_string(index) + "]";
}

void Fields::fail(const std::string& field, const std::string& what) const {
  schema_fail(source_, field, what);
}

}  // namespace miniperm::detail
