#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace miniperm::detail {

enum class TokKind {
  Ident,
  Number,
  String,        // quoted string or template without substitutions; text is the decoded value
  TemplatePart,  // a piece of a template that has substitutions
  Regex,
  Punct,
};

struct Token {
  TokKind kind = TokKind::Punct;
  std::string text;
  std::uint32_t line = 1;
  std::uint32_t column = 1;
};

struct LexResult {
  std::vector<Token> tokens;
  // Unterminated strings, comments, templates or regexes and stray closers.
  std::size_t anomalies = 0;
};

/// Best-effort JavaScript tokenizer. Comments are dropped; string and
/// template contents never produce identifier tokens, while code inside
/// template substitutions does.
LexResult lex_js(std::string_view src);

}  // namespace miniperm::detail
