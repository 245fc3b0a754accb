#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace pesao::toml {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

// Parses the TOML subset used by config and scenario files into a JSON tree:
// tables, dotted table headers, arrays of tables, inline tables, nested
// arrays, basic/literal strings, integers, floats and booleans. Dates and
// multi-line strings are not supported.
nlohmann::json parse(std::string_view text);
nlohmann::json parse_file(const std::filesystem::path& path);

}  // namespace pesao::toml
