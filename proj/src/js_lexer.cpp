#include "js_lexer.hpp"

#include <array>

namespace miniperm::detail {

namespace {

bool ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$' || c >= 0x80;
}

bool ident_char(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

bool digit(unsigned char c) { return c >= '0' && c <= '9'; }

constexpr std::array<std::string_view, 14> kRegexAfterKeyword{
    "return", "typeof", "instanceof", "in",    "of",   "new",   "delete",
    "void",   "throw",  "case",       "do",    "else", "yield", "await",
};

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  LexResult run() {
    while (pos_ < src_.size()) {
      const unsigned char c = src_[pos_];
      if (c == '\n') {
        newline();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
        ++pos_;
      } else if (c == '/' && peek(1) == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '/' && peek(1) == '*') {
        block_comment();
      } else if (c == '\'' || c == '"') {
        quoted(static_cast<char>(c));
      } else if (c == '`') {
        ++pos_;
        template_segment(start_here(), true);
      } else if (ident_start(c)) {
        identifier();
      } else if (digit(c) || (c == '.' && digit(static_cast<unsigned char>(peek(1))))) {
        number();
      } else if (c == '/' && regex_allowed_) {
        regex();
      } else {
        punct();
      }
    }
    if (!templates_.empty()) ++out_.anomalies;
    return std::move(out_);
  }

 private:
  struct Start {
    std::uint32_t line;
    std::uint32_t column;
  };

  char peek(std::size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }

  Start start_here() const {
    return {line_, static_cast<std::uint32_t>(pos_ - line_start_ + 1)};
  }

  void newline() {
    ++pos_;
    ++line_;
    line_start_ = pos_;
  }

  void emit(TokKind kind, std::string text, Start at) {
    out_.tokens.push_back(Token{kind, std::move(text), at.line, at.column});
  }

  void block_comment() {
    pos_ += 2;
    while (pos_ < src_.size()) {
      if (src_[pos_] == '*' && peek(1) == '/') {
        pos_ += 2;
        return;
      }
      if (src_[pos_] == '\n') {
        newline();
      } else {
        ++pos_;
      }
    }
    ++out_.anomalies;
  }

  // Consumes an escape sequence after the backslash and appends its value.
  void escape(std::string& value) {
    const char e = peek(0);
    if (e == '\0' && pos_ >= src_.size()) return;
    ++pos_;
    switch (e) {
      case 'n': value += '\n'; break;
      case 't': value += '\t'; break;
      case 'r': value += '\r'; break;
      case 'b': value += '\b'; break;
      case 'f': value += '\f'; break;
      case 'v': value += '\v'; break;
      case '0': value += '\0'; break;
      case '\r':
        if (peek(0) == '\n') newline();
        break;
      case '\n':
        // Line continuation.
        ++line_;
        line_start_ = pos_;
        break;
      case 'x': {
        const int h = hex_value(peek(0)), l = hex_value(peek(1));
        if (h >= 0 && l >= 0) {
          append_utf8(value, static_cast<std::uint32_t>(h * 16 + l));
          pos_ += 2;
        } else {
          value += 'x';
        }
        break;
      }
      case 'u': {
        std::uint32_t cp = 0;
        if (peek(0) == '{') {
          std::size_t k = 1;
          while (hex_value(peek(k)) >= 0) cp = cp * 16 + static_cast<std::uint32_t>(hex_value(peek(k++)));
          if (peek(k) == '}' && k > 1) {
            pos_ += k + 1;
            append_utf8(value, cp);
            break;
          }
          value += 'u';
          break;
        }
        bool ok = true;
        for (std::size_t k = 0; k < 4; ++k) {
          const int h = hex_value(peek(k));
          if (h < 0) {
            ok = false;
            break;
          }
          cp = cp * 16 + static_cast<std::uint32_t>(h);
        }
        if (ok) {
          pos_ += 4;
          append_utf8(value, cp);
        } else {
          value += 'u';
        }
        break;
      }
      default:
        value += e;
        break;
    }
  }

  void quoted(char quote) {
    const Start at = start_here();
    ++pos_;
    std::string value;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        // Unterminated: the string ends at the line break.
        ++out_.anomalies;
        break;
      }
      const char c = src_[pos_];
      if (c == quote) {
        ++pos_;
        break;
      }
      if (c == '\\') {
        ++pos_;
        escape(value);
        continue;
      }
      value += c;
      ++pos_;
    }
    emit(TokKind::String, std::move(value), at);
    regex_allowed_ = false;
  }

  // Scans template text up to the closing backtick or the next "${".
  // `first` is true for the segment right after the opening backtick.
  void template_segment(Start at, bool first) {
    std::string value;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '`') {
        ++pos_;
        emit(first ? TokKind::String : TokKind::TemplatePart, std::move(value), at);
        regex_allowed_ = false;
        return;
      }
      if (c == '$' && peek(1) == '{') {
        pos_ += 2;
        emit(TokKind::TemplatePart, std::move(value), at);
        templates_.push_back(0);
        regex_allowed_ = true;
        return;
      }
      if (c == '\\') {
        ++pos_;
        escape(value);
        continue;
      }
      if (c == '\n') {
        value += c;
        newline();
        continue;
      }
      value += c;
      ++pos_;
    }
    ++out_.anomalies;
    emit(first ? TokKind::String : TokKind::TemplatePart, std::move(value), at);
    regex_allowed_ = false;
  }

  void identifier() {
    const Start at = start_here();
    const std::size_t begin = pos_;
    while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    std::string text(src_.substr(begin, pos_ - begin));
    regex_allowed_ = false;
    for (auto kw : kRegexAfterKeyword) {
      if (kw == text) regex_allowed_ = true;
    }
    emit(TokKind::Ident, std::move(text), at);
  }

  void number() {
    const Start at = start_here();
    const std::size_t begin = pos_;
    if (src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X' || peek(1) == 'b' || peek(1) == 'B' ||
                              peek(1) == 'o' || peek(1) == 'O')) {
      pos_ += 2;
      while (pos_ < src_.size() && (hex_value(src_[pos_]) >= 0 || src_[pos_] == '_')) ++pos_;
    } else {
      while (pos_ < src_.size() && (digit(src_[pos_]) || src_[pos_] == '_')) ++pos_;
      if (peek(0) == '.') {
        ++pos_;
        while (pos_ < src_.size() && (digit(src_[pos_]) || src_[pos_] == '_')) ++pos_;
      }
      if (peek(0) == 'e' || peek(0) == 'E') {
        std::size_t k = 1;
        if (peek(k) == '+' || peek(k) == '-') ++k;
        if (digit(static_cast<unsigned char>(peek(k)))) {
          pos_ += k;
          while (pos_ < src_.size() && digit(src_[pos_])) ++pos_;
        }
      }
    }
    if (peek(0) == 'n') ++pos_;  // BigInt suffix
    emit(TokKind::Number, std::string(src_.substr(begin, pos_ - begin)), at);
    regex_allowed_ = false;
  }

  void regex() {
    const Start at = start_here();
    const std::size_t begin = pos_;
    ++pos_;
    bool in_class = false;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        ++out_.anomalies;
        break;
      }
      const char c = src_[pos_];
      if (c == '\\') {
        pos_ += 2;
        continue;
      }
      ++pos_;
      if (c == '[') in_class = true;
      else if (c == ']') in_class = false;
      else if (c == '/' && !in_class) break;
    }
    while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    emit(TokKind::Regex, std::string(src_.substr(begin, pos_ - begin)), at);
    regex_allowed_ = false;
  }

  void punct() {
    const Start at = start_here();
    const char c = src_[pos_];
    std::string text(1, c);
    if (c == '?' && peek(1) == '.' && !digit(static_cast<unsigned char>(peek(2)))) {
      text = "?.";
    } else if (c == '.' && peek(1) == '.' && peek(2) == '.') {
      text = "...";
    } else if (c == '=' && peek(1) == '>') {
      text = "=>";
    }
    pos_ += text.size();

    if (c == '{') {
      if (!templates_.empty()) ++templates_.back();
      ++depth_;
    } else if (c == '}') {
      if (!templates_.empty() && templates_.back() == 0) {
        templates_.pop_back();
        template_segment(at, false);
        return;
      }
      if (!templates_.empty()) --templates_.back();
      if (depth_ == 0) {
        ++out_.anomalies;
      } else {
        --depth_;
      }
    }
    // A slash after a closing bracket divides; after any other punctuator
    // it starts a regex.
    regex_allowed_ = !(c == ')' || c == ']' || c == '}');
    emit(TokKind::Punct, std::move(text), at);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::size_t line_start_ = 0;
  bool regex_allowed_ = true;
  std::size_t depth_ = 0;
  std::vector<int> templates_;  // open-brace count inside each active substitution
  LexResult out_;
};

}  // namespace

LexResult lex_js(std::string_view src) { return Lexer(src).run(); }

}  // namespace miniperm::detail
