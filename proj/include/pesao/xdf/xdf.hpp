#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace pesao::xdf {

// File layout: "XDF:" then chunks. A chunk is
//   varlen(2 + body length) | u16 tag (LE) | body
// varlen is one byte k in {1, 4, 8} followed by k little-endian bytes.
//
// Bodies:
//   1 FileHeader    UTF-8 JSON metadata object
//   2 StreamHeader  u32 stream id | UTF-8 JSON header
//   3 Samples       u32 stream id | varlen count | per sample:
//                   u8 flag (8: f64 timestamp follows, 0: deduced) | values
//                   values: f64 LE per channel, or varlen-prefixed UTF-8 per channel
//   4 ClockOffset   u32 stream id | f64 collection time | f64 offset
//   5 Boundary      16 fixed bytes
//   6 StreamFooter  u32 stream id | UTF-8 JSON {first_timestamp, last_timestamp, sample_count}

enum class ChunkTag : std::uint16_t {
  file_header = 1,
  stream_header = 2,
  samples = 3,
  clock_offset = 4,
  boundary = 5,
  stream_footer = 6,
};

enum class ChannelFormat { double64, string };

class FormatError : public std::runtime_error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : std::runtime_error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  [[nodiscard]] std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class WriterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> varlen_encode(std::uint64_t n);

struct VarlenValue {
  std::uint64_t value;
  std::size_t consumed;
};

/// Throws FormatError (offset relative to `bytes`) on an invalid size byte
/// or truncated input.
VarlenValue varlen_decode(std::span<const std::uint8_t> bytes);

struct StreamHeaderInfo {
  std::uint32_t stream_id = 0;
  std::string name;
  std::string type_tag;
  int channel_count = 0;
  double nominal_rate_hz = 0.0;
  ChannelFormat channel_format = ChannelFormat::double64;
  nlohmann::json metadata = nlohmann::json::object();

  bool operator==(const StreamHeaderInfo&) const = default;
};

using Values = std::variant<std::vector<double>, std::vector<std::string>>;

struct XdfSample {
  double timestamp = 0.0;
  Values values;
  bool operator==(const XdfSample&) const = default;
};

struct ClockOffset {
  double collection_time = 0.0;
  double offset = 0.0;
  bool operator==(const ClockOffset&) const = default;
};

struct StreamFooterInfo {
  double first_timestamp = 0.0;
  double last_timestamp = 0.0;
  std::uint64_t sample_count = 0;
  bool operator==(const StreamFooterInfo&) const = default;
};

struct WriterOptions {
  bool allow_overwrite = false;
};

/// Single-owner container writer. Appends are atomic per call: a rejected
/// call writes nothing.
class XdfWriter {
 public:
  /// Writes the magic and the FileHeader chunk. Refuses an existing path
  /// unless allow_overwrite is set.
  XdfWriter(const std::filesystem::path& path, const nlohmann::json& metadata,
            WriterOptions options = {});
  ~XdfWriter();
  XdfWriter(const XdfWriter&) = delete;
  XdfWriter& operator=(const XdfWriter&) = delete;

  void add_stream(const StreamHeaderInfo& header);
  /// Timestamps equal to last explicit stamp + i / nominal rate are stored
  /// as deduced (flag 0); everything else carries an explicit stamp.
  void append_samples(std::uint32_t stream_id, std::span<const XdfSample> samples);
  void append_clock_offset(std::uint32_t stream_id, double collection_time, double offset);
  void append_boundary();
  /// Footers for every stream, then a trailing Boundary. A second call throws.
  void finalize();

  [[nodiscard]] bool finalized() const { return finalized_; }
  [[nodiscard]] std::uint64_t sample_count(std::uint32_t stream_id) const;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  struct StreamState {
    StreamHeaderInfo header;
    std::optional<double> first;
    double last = 0.0;
    std::uint64_t count = 0;
    std::optional<double> last_explicit;
    std::uint64_t since_explicit = 0;
  };

  void write_chunk(ChunkTag tag, const std::string& body);
  StreamState& stream(std::uint32_t id);

  std::filesystem::path path_;
  std::ofstream out_;
  std::map<std::uint32_t, StreamState> streams_;
  bool finalized_ = false;
};

struct StreamData {
  StreamHeaderInfo header;
  std::vector<XdfSample> samples;
  std::vector<ClockOffset> clock_offsets;
  std::optional<StreamFooterInfo> footer;
};

struct Recording {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<StreamData> streams;
  bool truncated = false;
  std::string notice;

  [[nodiscard]] const StreamData* find_by_name(const std::string& name) const;
  [[nodiscard]] const StreamData* find_by_id(std::uint32_t id) const;
};

/// Full parse. A truncated trailing chunk is recoverable: everything up to
/// the last intact Boundary is returned with `truncated` set.
Recording parse_recording(std::span<const std::uint8_t> bytes);
Recording read_recording(const std::filesystem::path& path);

struct ChunkSpan {
  std::uint64_t offset = 0;  // of the length prefix
  std::uint64_t size = 0;    // prefix + tag + body
  ChunkTag tag = ChunkTag::boundary;
};

struct ValidationReport {
  bool ok = true;
  std::uint64_t bad_offset = 0;
  std::string error;
  std::vector<ChunkSpan> chunks;
  Recording recording;
};

/// Walks every chunk and checks that chunks tile the file exactly, bodies
/// parse to their declared lengths, and footers agree with the samples.
ValidationReport validate(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace pesao::xdf
