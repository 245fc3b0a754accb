#include "pesao/util/toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace pesao::toml {
namespace {

using nlohmann::json;

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  json run() {
    json root = json::object();
    json* current = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        current = parse_header(root);
      } else {
        parse_keyval(*current);
      }
      expect_line_end();
    }
    return root;
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
  int line_ = 1;

  [[nodiscard]] bool eof() const { return i_ >= s_.size(); }
  [[nodiscard]] char peek(std::size_t ahead = 0) const {
    return i_ + ahead < s_.size() ? s_[i_ + ahead] : '\0';
  }
  char get() {
    const char c = s_[i_++];
    if (c == '\n') ++line_;
    return c;
  }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(line_, what); }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) get();
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') get();
    }
  }
  void skip_ws_comments_newlines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
      } else {
        break;
      }
    }
  }
  void expect_line_end() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() == '\r') get();
    if (eof()) return;
    if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "' after value");
    get();
  }

  std::string parse_key_part() {
    skip_ws();
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-')) {
      key.push_back(get());
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts{parse_key_part()};
    skip_ws();
    while (peek() == '.') {
      get();
      parts.push_back(parse_key_part());
      skip_ws();
    }
    return parts;
  }

  json* descend(json& root, const std::vector<std::string>& path, std::size_t count) {
    json* node = &root;
    for (std::size_t k = 0; k < count; ++k) {
      json& child = (*node)[path[k]];
      if (child.is_null()) child = json::object();
      if (child.is_array()) {
        if (child.empty() || !child.back().is_object()) fail("key '" + path[k] + "' is not a table");
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("key '" + path[k] + "' is not a table");
      }
    }
    return node;
  }

  json* parse_header(json& root) {
    get();  // '['
    const bool array_of_tables = peek() == '[';
    if (array_of_tables) get();
    const auto path = parse_dotted_key();
    skip_ws();
    if (get() != ']') fail("expected ']' closing table header");
    if (array_of_tables && get() != ']') fail("expected ']]' closing array-of-tables header");

    json* parent = descend(root, path, path.size() - 1);
    json& slot = (*parent)[path.back()];
    if (array_of_tables) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("'" + path.back() + "' is already defined as a non-array");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("'" + path.back() + "' is already defined as a non-table");
    return &slot;
  }

  void parse_keyval(json& table) {
    const auto path = parse_dotted_key();
    skip_ws();
    if (get() != '=') fail("expected '=' after key");
    skip_ws();
    json value = parse_value();
    json* target = descend(table, path, path.size() - 1);
    if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*target)[path.back()] = std::move(value);
  }

  json parse_value() {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (s_.substr(i_, 4) == "true") {
      i_ += 4;
      return true;
    }
    if (s_.substr(i_, 5) == "false") {
      i_ += 5;
      return false;
    }
    return parse_number();
  }

  json parse_number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                      peek() == '-' || peek() == '.' || peek() == '_')) {
      const char c = get();
      if (c != '_') tok.push_back(c);
    }
    if (tok.empty()) fail("expected a value");
    const bool is_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" ||
                          tok == "+inf" || tok == "-inf" || tok == "nan";
    if (!is_float) {
      std::int64_t v = 0;
      const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
      auto [p, ec] = std::from_chars(b, tok.data() + tok.size(), v);
      if (ec != std::errc{} || p != tok.data() + tok.size()) fail("invalid integer '" + tok + "'");
      return v;
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) fail("invalid number '" + tok + "'");
      return v;
    } catch (const std::logic_error&) {
      fail("invalid number '" + tok + "'");
    }
  }

  std::string parse_basic_string() {
    get();  // '"'
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '"') break;
      if (c != '\\') {
        out.push_back(c);
        continue;
      }
      const char e = get();
      switch (e) {
        case 'n': out.push_back('\n'); break;
        case 't': out.push_back('\t'); break;
        case 'r': out.push_back('\r'); break;
        case '"': out.push_back('"'); break;
        case '\\': out.push_back('\\'); break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  std::string parse_literal_string() {
    get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') break;
      out.push_back(c);
    }
    return out;
  }

  json parse_array() {
    get();  // '['
    json arr = json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        get();
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_comments_newlines();
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() == ']') {
        get();
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  json parse_inline_table() {
    get();  // '{'
    json tbl = json::object();
    skip_ws();
    if (peek() == '}') {
      get();
      return tbl;
    }
    while (true) {
      parse_keyval(tbl);
      skip_ws();
      const char c = get();
      if (c == '}') return tbl;
      if (c != ',') fail("expected ',' or '}' in inline table");
      skip_ws();
    }
  }
};

}  // namespace

nlohmann::json parse(std::string_view text) { return Parser(text).run(); }

nlohmann::json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace pesao::toml
