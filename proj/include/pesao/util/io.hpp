#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

using gzFile = struct gzFile_s*;

namespace pesao::util {

/// Shortest-free, round-trippable rendering: 17 significant digits.
std::string fmt17(double v);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view s);
/// Splits one CSV line honoring double-quoted fields.
std::vector<std::string> csv_split(std::string_view line);

std::vector<std::string> split(std::string_view s, char sep);

/// Gzip writer of newline-terminated records. Output is byte-deterministic
/// (zlib writes a zero mtime header).
class GzLineWriter {
 public:
  explicit GzLineWriter(const std::filesystem::path& path);
  ~GzLineWriter();
  GzLineWriter(const GzLineWriter&) = delete;
  GzLineWriter& operator=(const GzLineWriter&) = delete;

  void write_line(std::string_view line);
  void close();

 private:
  gzFile file_ = nullptr;
  std::filesystem::path path_;
};

class GzLineReader {
 public:
  explicit GzLineReader(const std::filesystem::path& path);
  ~GzLineReader();
  GzLineReader(const GzLineReader&) = delete;
  GzLineReader& operator=(const GzLineReader&) = delete;

  /// Next line without its terminator, or nullopt at end of stream.
  std::optional<std::string> next();

 private:
  gzFile file_ = nullptr;
  std::filesystem::path path_;
};

}  // namespace pesao::util
