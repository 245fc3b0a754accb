#include "pesao/xdf/xdf.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>

namespace pesao::xdf {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

constexpr std::array<std::uint8_t, 4> kMagic{'X', 'D', 'F', ':'};
constexpr std::array<std::uint8_t, 16> kBoundaryUuid{0x43, 0xA5, 0x46, 0xDC, 0xCB, 0xF5,
                                                     0x41, 0x0F, 0xB3, 0x0E, 0xD5, 0x46,
                                                     0x73, 0x83, 0xCB, 0xE4};

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_varlen(std::string& out, std::uint64_t n) {
  const auto enc = varlen_encode(n);
  out.append(reinterpret_cast<const char*>(enc.data()), enc.size());
}

std::string_view format_name(ChannelFormat f) {
  return f == ChannelFormat::double64 ? "double64" : "string";
}

double deduced(double last_explicit, std::uint64_t i, double rate) {
  return last_explicit + static_cast<double>(i) / rate;
}

/// Bounds-checked little-endian reader over one region of the file.
class Cursor {
 public:
  Cursor(std::span<const std::uint8_t> bytes, std::uint64_t base) : b_(bytes), base_(base) {}

  [[nodiscard]] std::size_t remaining() const { return b_.size() - pos_; }
  [[nodiscard]] std::uint64_t offset() const { return base_ + pos_; }
  [[nodiscard]] bool done() const { return pos_ == b_.size(); }

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::uint64_t varlen(const char* what) {
    try {
      const auto r = varlen_decode(b_.subspan(pos_));
      pos_ += r.consumed;
      return r.value;
    } catch (const FormatError& e) {
      throw FormatError(offset() + e.offset(), std::string(what) + ": " + e.what());
    }
  }

  std::string bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > remaining()) throw FormatError(offset(), std::string("truncated ") + what);
  }

  std::span<const std::uint8_t> b_;
  std::uint64_t base_;
  std::size_t pos_ = 0;
};

nlohmann::json parse_json(const std::string& text, std::uint64_t at, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(at, std::string("invalid ") + what + " JSON: " + e.what());
  }
}

nlohmann::json header_json(const StreamHeaderInfo& h) {
  return {{"name", h.name},
          {"type", h.type_tag},
          {"channel_count", h.channel_count},
          {"nominal_srate", h.nominal_rate_hz},
          {"channel_format", std::string(format_name(h.channel_format))},
          {"metadata", h.metadata}};
}

StreamHeaderInfo header_from_json(std::uint32_t id, const nlohmann::json& j, std::uint64_t at) {
  try {
    StreamHeaderInfo h;
    h.stream_id = id;
    h.name = j.at("name").get<std::string>();
    h.type_tag = j.at("type").get<std::string>();
    h.channel_count = j.at("channel_count").get<int>();
    h.nominal_rate_hz = j.at("nominal_srate").get<double>();
    const auto fmt = j.at("channel_format").get<std::string>();
    if (fmt == "double64") {
      h.channel_format = ChannelFormat::double64;
    } else if (fmt == "string") {
      h.channel_format = ChannelFormat::string;
    } else {
      throw FormatError(at, "unsupported channel format " + fmt);
    }
    h.metadata = j.value("metadata", nlohmann::json::object());
    if (h.channel_count < 0) throw FormatError(at, "negative channel count");
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(at, std::string("bad stream header: ") + e.what());
  }
}

/// Incremental parser shared by the reader and the validator.
class Parser {
 public:
  explicit Parser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void check_magic() {
    if (bytes_.size() < kMagic.size() ||
        !std::equal(kMagic.begin(), kMagic.end(), bytes_.begin())) {
      throw FormatError(0, "bad magic, expected 'XDF:'");
    }
    pos_ = kMagic.size();
  }

  [[nodiscard]] bool at_end() const { return pos_ == bytes_.size(); }
  [[nodiscard]] std::uint64_t pos() const { return pos_; }

  /// Parses the next chunk. Returns nullopt when the remaining bytes hold
  /// only part of a chunk (truncation); throws FormatError on corruption.
  std::optional<ChunkSpan> next() {
    const std::uint64_t start = pos_;
    const auto rest = bytes_.subspan(pos_);
    VarlenValue len{};
    try {
      len = varlen_decode(rest);
    } catch (const FormatError& e) {
      if (rest.empty() || (rest[0] == 1 || rest[0] == 4 || rest[0] == 8)) return std::nullopt;
      throw FormatError(start, e.what());
    }
    if (len.value < 2) throw FormatError(start, "chunk length below tag size");
    if (len.value > rest.size() - len.consumed) return std::nullopt;

    const auto chunk = rest.subspan(len.consumed, static_cast<std::size_t>(len.value));
    std::uint16_t tag_raw = 0;
    std::memcpy(&tag_raw, chunk.data(), 2);
    const std::uint64_t body_at = start + len.consumed + 2;
    Cursor body(chunk.subspan(2), body_at);
    if (tag_raw < 1 || tag_raw > 6) {
      throw FormatError(start + len.consumed, "unknown chunk tag " + std::to_string(tag_raw));
    }
    const auto tag = static_cast<ChunkTag>(tag_raw);
    parse_body(tag, body);
    if (!body.done()) throw FormatError(body.offset(), "chunk body has trailing bytes");

    pos_ = start + len.consumed + len.value;
    return ChunkSpan{start, len.consumed + len.value, tag};
  }

  Recording rec;

  struct Deduction {
    std::optional<double> last_explicit;
    std::uint64_t since = 0;
  };

  struct Mark {
    std::size_t streams;
    std::vector<std::size_t> samples;
    std::vector<std::size_t> offsets;
    std::vector<bool> footer;
    std::map<std::uint32_t, Deduction> deduction;
    std::uint64_t pos;
  };

  Mark mark() const {
    Mark m{rec.streams.size(), {}, {}, {}, deduction_, pos_};
    for (const auto& s : rec.streams) {
      m.samples.push_back(s.samples.size());
      m.offsets.push_back(s.clock_offsets.size());
      m.footer.push_back(s.footer.has_value());
    }
    return m;
  }

  void rollback(const Mark& m) {
    rec.streams.resize(m.streams);
    index_.clear();
    for (std::size_t i = 0; i < rec.streams.size(); ++i) {
      auto& s = rec.streams[i];
      s.samples.resize(m.samples[i]);
      s.clock_offsets.resize(m.offsets[i]);
      if (!m.footer[i]) s.footer.reset();
      index_[s.header.stream_id] = i;
    }
    deduction_ = m.deduction;
  }

  bool saw_file_header = false;

 private:
  StreamData& stream(std::uint32_t id, std::uint64_t at) {
    const auto it = index_.find(id);
    if (it == index_.end()) throw FormatError(at, "chunk for undeclared stream " + std::to_string(id));
    return rec.streams[it->second];
  }

  void parse_body(ChunkTag tag, Cursor& c) {
    const std::uint64_t at = c.offset();
    switch (tag) {
      case ChunkTag::file_header: {
        rec.metadata = parse_json(c.bytes(c.remaining(), "file header"), at, "file header");
        saw_file_header = true;
        break;
      }
      case ChunkTag::stream_header: {
        const auto id = c.get<std::uint32_t>("stream id");
        if (index_.count(id) != 0) throw FormatError(at, "duplicate stream id " + std::to_string(id));
        const auto j = parse_json(c.bytes(c.remaining(), "stream header"), at, "stream header");
        StreamData s;
        s.header = header_from_json(id, j, at);
        index_[id] = rec.streams.size();
        rec.streams.push_back(std::move(s));
        break;
      }
      case ChunkTag::samples: {
        const auto id = c.get<std::uint32_t>("stream id");
        StreamData& s = stream(id, at);
        Deduction& d = deduction_[id];
        const std::uint64_t n = c.varlen("sample count");
        const auto channels = static_cast<std::size_t>(s.header.channel_count);
        for (std::uint64_t k = 0; k < n; ++k) {
          XdfSample smp;
          const std::uint64_t flag_at = c.offset();
          const auto flag = c.get<std::uint8_t>("timestamp flag");
          if (flag == 8) {
            smp.timestamp = c.get<double>("timestamp");
            d.last_explicit = smp.timestamp;
            d.since = 0;
          } else if (flag == 0) {
            if (!d.last_explicit || !(s.header.nominal_rate_hz > 0.0)) {
              throw FormatError(flag_at, "deduced timestamp without explicit stamp or rate");
            }
            ++d.since;
            smp.timestamp = deduced(*d.last_explicit, d.since, s.header.nominal_rate_hz);
          } else {
            throw FormatError(flag_at, "invalid timestamp flag " + std::to_string(flag));
          }
          if (s.header.channel_format == ChannelFormat::double64) {
            std::vector<double> v(channels);
            for (auto& x : v) x = c.get<double>("channel value");
            smp.values = std::move(v);
          } else {
            std::vector<std::string> v(channels);
            for (auto& x : v) x = c.bytes(c.varlen("string length"), "string value");
            smp.values = std::move(v);
          }
          s.samples.push_back(std::move(smp));
        }
        break;
      }
      case ChunkTag::clock_offset: {
        const auto id = c.get<std::uint32_t>("stream id");
        StreamData& s = stream(id, at);
        ClockOffset o;
        o.collection_time = c.get<double>("collection time");
        o.offset = c.get<double>("offset value");
        s.clock_offsets.push_back(o);
        break;
      }
      case ChunkTag::boundary: {
        const auto uuid = c.bytes(16, "boundary");
        if (std::memcmp(uuid.data(), kBoundaryUuid.data(), 16) != 0) {
          throw FormatError(at, "boundary chunk has the wrong signature");
        }
        break;
      }
      case ChunkTag::stream_footer: {
        const auto id = c.get<std::uint32_t>("stream id");
        StreamData& s = stream(id, at);
        const auto j = parse_json(c.bytes(c.remaining(), "stream footer"), at, "stream footer");
        try {
          s.footer = StreamFooterInfo{j.at("first_timestamp").get<double>(),
                                      j.at("last_timestamp").get<double>(),
                                      j.at("sample_count").get<std::uint64_t>()};
        } catch (const nlohmann::json::exception& e) {
          throw FormatError(at, std::string("bad stream footer: ") + e.what());
        }
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
  std::map<std::uint32_t, std::size_t> index_;
  std::map<std::uint32_t, Deduction> deduction_;
};

}  // namespace

std::vector<std::uint8_t> varlen_encode(std::uint64_t n) {
  std::vector<std::uint8_t> out;
  std::size_t k = 8;
  if (n <= 0xFFu) {
    k = 1;
  } else if (n <= 0xFFFFFFFFu) {
    k = 4;
  }
  out.push_back(static_cast<std::uint8_t>(k));
  for (std::size_t i = 0; i < k; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  return out;
}

VarlenValue varlen_decode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw FormatError(0, "truncated length prefix");
  const std::size_t k = bytes[0];
  if (k != 1 && k != 4 && k != 8) {
    throw FormatError(0, "invalid length-size byte " + std::to_string(k));
  }
  if (bytes.size() < 1 + k) throw FormatError(0, "truncated length prefix");
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < k; ++i) n |= static_cast<std::uint64_t>(bytes[1 + i]) << (8 * i);
  return {n, 1 + k};
}

XdfWriter::XdfWriter(const std::filesystem::path& path, const nlohmann::json& metadata,
                     WriterOptions options)
    : path_(path) {
  if (!metadata.is_object()) throw WriterError("file metadata must be a JSON object");
  if (!options.allow_overwrite && std::filesystem::exists(path)) {
    throw WriterError("refusing to overwrite existing file " + path.string());
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw WriterError("cannot open " + path.string() + " for writing");
  out_.write(reinterpret_cast<const char*>(kMagic.data()), kMagic.size());
  write_chunk(ChunkTag::file_header, metadata.dump());
  out_.flush();
}

XdfWriter::~XdfWriter() = default;

void XdfWriter::write_chunk(ChunkTag tag, const std::string& body) {
  std::string chunk;
  put_varlen(chunk, body.size() + 2);
  put(chunk, static_cast<std::uint16_t>(tag));
  chunk += body;
  out_.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
  if (!out_) throw WriterError("write failed for " + path_.string());
}

XdfWriter::StreamState& XdfWriter::stream(std::uint32_t id) {
  const auto it = streams_.find(id);
  if (it == streams_.end()) throw WriterError("unknown stream id " + std::to_string(id));
  return it->second;
}

void XdfWriter::add_stream(const StreamHeaderInfo& header) {
  if (finalized_) throw WriterError("writer already finalized");
  if (streams_.count(header.stream_id) != 0) {
    throw WriterError("duplicate stream id " + std::to_string(header.stream_id));
  }
  if (header.channel_count < 0) throw WriterError("negative channel count");
  std::string body;
  put(body, header.stream_id);
  body += header_json(header).dump();
  write_chunk(ChunkTag::stream_header, body);
  streams_[header.stream_id].header = header;
}

void XdfWriter::append_samples(std::uint32_t stream_id, std::span<const XdfSample> samples) {
  if (finalized_) throw WriterError("writer already finalized");
  StreamState& s = stream(stream_id);
  const auto channels = static_cast<std::size_t>(s.header.channel_count);
  const bool numeric = s.header.channel_format == ChannelFormat::double64;
  for (const auto& smp : samples) {
    const std::size_t n = numeric ? std::get_if<std::vector<double>>(&smp.values) != nullptr
                                        ? std::get<std::vector<double>>(smp.values).size()
                                        : SIZE_MAX
                                  : std::get_if<std::vector<std::string>>(&smp.values) != nullptr
                                        ? std::get<std::vector<std::string>>(smp.values).size()
                                        : SIZE_MAX;
    if (n == SIZE_MAX) throw WriterError("sample value type does not match channel format");
    if (n != channels) {
      throw WriterError("channel-count mismatch on stream " + std::to_string(stream_id) +
                        ": expected " + std::to_string(channels) + ", got " + std::to_string(n));
    }
  }

  std::string body;
  put(body, stream_id);
  put_varlen(body, samples.size());
  std::optional<double> last_explicit = s.last_explicit;
  std::uint64_t since = s.since_explicit;
  for (const auto& smp : samples) {
    const bool can_deduce = last_explicit && s.header.nominal_rate_hz > 0.0 &&
                            deduced(*last_explicit, since + 1, s.header.nominal_rate_hz) ==
                                smp.timestamp;
    if (can_deduce) {
      put(body, std::uint8_t{0});
      ++since;
    } else {
      put(body, std::uint8_t{8});
      put(body, smp.timestamp);
      last_explicit = smp.timestamp;
      since = 0;
    }
    if (numeric) {
      for (double v : std::get<std::vector<double>>(smp.values)) put(body, v);
    } else {
      for (const auto& v : std::get<std::vector<std::string>>(smp.values)) {
        put_varlen(body, v.size());
        body += v;
      }
    }
  }
  write_chunk(ChunkTag::samples, body);

  s.last_explicit = last_explicit;
  s.since_explicit = since;
  for (const auto& smp : samples) {
    if (!s.first) s.first = smp.timestamp;
    s.last = smp.timestamp;
  }
  s.count += samples.size();
}

void XdfWriter::append_clock_offset(std::uint32_t stream_id, double collection_time,
                                    double offset) {
  if (finalized_) throw WriterError("writer already finalized");
  stream(stream_id);
  std::string body;
  put(body, stream_id);
  put(body, collection_time);
  put(body, offset);
  write_chunk(ChunkTag::clock_offset, body);
}

void XdfWriter::append_boundary() {
  if (finalized_) throw WriterError("writer already finalized");
  write_chunk(ChunkTag::boundary,
              std::string(reinterpret_cast<const char*>(kBoundaryUuid.data()), kBoundaryUuid.size()));
  out_.flush();
}

void XdfWriter::finalize() {
  if (finalized_) throw WriterError("writer already finalized");
  for (const auto& [id, s] : streams_) {
    std::string body;
    put(body, id);
    const nlohmann::json footer{{"first_timestamp", s.first.value_or(0.0)},
                                {"last_timestamp", s.first ? s.last : 0.0},
                                {"sample_count", s.count}};
    body += footer.dump();
    write_chunk(ChunkTag::stream_footer, body);
  }
  append_boundary();
  out_.close();
  if (!out_) throw WriterError("close failed for " + path_.string());
  finalized_ = true;
}

std::uint64_t XdfWriter::sample_count(std::uint32_t stream_id) const {
  const auto it = streams_.find(stream_id);
  return it == streams_.end() ? 0 : it->second.count;
}

const StreamData* Recording::find_by_name(const std::string& name) const {
  for (const auto& s : streams) {
    if (s.header.name == name) return &s;
  }
  return nullptr;
}

const StreamData* Recording::find_by_id(std::uint32_t id) const {
  for (const auto& s : streams) {
    if (s.header.stream_id == id) return &s;
  }
  return nullptr;
}

Recording parse_recording(std::span<const std::uint8_t> bytes) {
  Parser p(bytes);
  p.check_magic();
  auto last_boundary = p.mark();
  while (!p.at_end()) {
    const auto chunk = p.next();
    if (!chunk) {
      const std::uint64_t cut = p.pos();
      p.rollback(last_boundary);
      p.rec.truncated = true;
      p.rec.notice = "truncated chunk at offset " + std::to_string(cut) +
                     "; data recovered up to offset " + std::to_string(last_boundary.pos);
      return std::move(p.rec);
    }
    if (chunk->tag == ChunkTag::boundary) last_boundary = p.mark();
  }
  return std::move(p.rec);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Recording read_recording(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return parse_recording(bytes);
}

ValidationReport validate(std::span<const std::uint8_t> bytes) {
  ValidationReport report;
  Parser p(bytes);
  try {
    p.check_magic();
    while (!p.at_end()) {
      const auto chunk = p.next();
      if (!chunk) throw FormatError(p.pos(), "truncated chunk");
      if (report.chunks.empty() && chunk->tag != ChunkTag::file_header) {
        throw FormatError(chunk->offset, "first chunk is not a FileHeader");
      }
      report.chunks.push_back(*chunk);
    }
    if (report.chunks.empty()) throw FormatError(p.pos(), "no FileHeader chunk");
    for (const auto& s : p.rec.streams) {
      if (!s.footer) {
        throw FormatError(bytes.size(), "stream " + std::to_string(s.header.stream_id) +
                                            " has no footer");
      }
      if (s.footer->sample_count != s.samples.size()) {
        throw FormatError(bytes.size(), "stream " + std::to_string(s.header.stream_id) +
                                            " footer count " +
                                            std::to_string(s.footer->sample_count) +
                                            " != " + std::to_string(s.samples.size()) +
                                            " samples");
      }
    }
  } catch (const FormatError& e) {
    report.ok = false;
    report.bad_offset = e.offset();
    report.error = e.what();
  }
  report.recording = std::move(p.rec);
  return report;
}

}  // namespace pesao::xdf
