#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pesao/core/types.hpp"
#include "pesao/wire/timesync.hpp"
#include "pesao/xdf/xdf.hpp"

namespace pesao::recorder {

struct SampleItem {
  xdf::XdfSample sample;
};
struct OffsetItem {
  double collection_time = 0.0;
  double offset = 0.0;
};
/// PTS beacon, stored in the gaze stream's companion stream.
struct PtsItem {
  xdf::XdfSample sample;
};
struct DropItem {
  std::string reason;
};
using IngestItem = std::variant<SampleItem, OffsetItem, PtsItem, DropItem>;

/// Type tag of the companion stream that carries a gaze stream's beacons.
inline constexpr const char* kPtsTypeTag = "pts";

bool is_marker_stream(StreamType t);

/// Decodes one stream's lines and keeps its timesync bookkeeping. One per
/// subscribed stream, owned by that stream's reader.
class StreamIngest {
 public:
  explicit StreamIngest(StreamInfo info, double timesync_period_s = 2.0,
                        double timesync_timeout_s = 1.0);

  /// A request line when an exchange is due at `now` (the first one is due
  /// immediately). The request is stamped t1 = now.
  std::optional<std::string> poll_timesync(WorldTime now);

  /// Handles one line received at `arrival`. Timesync replies that complete
  /// an exchange yield an OffsetItem; replies that match nothing yield
  /// nothing; undecodable or inconsistent lines yield a DropItem.
  std::optional<IngestItem> on_line(std::string_view line, WorldTime arrival);

  [[nodiscard]] const StreamInfo& info() const { return info_; }
  [[nodiscard]] std::size_t timeouts() const { return tracker_.timeouts(); }

 private:
  StreamInfo info_;
  double period_s_;
  std::optional<double> next_sync_;
  wire::TimesyncTracker tracker_;
  std::optional<double> last_t_;
};

struct StreamCounts {
  std::uint64_t samples = 0;
  std::uint64_t clock_offsets = 0;
  std::uint64_t drops = 0;
  std::uint64_t pts = 0;
};

/// Owns the container writer for one recording. Stream i of the list gets
/// stream id i + 1; each gaze stream also gets a companion PTS stream.
class ContainerSink {
 public:
  ContainerSink(const std::filesystem::path& path, const nlohmann::json& metadata,
                const std::vector<StreamInfo>& streams, double boundary_period_s = 10.0);

  /// Applies items of one stream in order; consecutive samples share a chunk.
  void apply(std::size_t index, const std::vector<IngestItem>& items);
  void apply(std::size_t index, const IngestItem& item);
  /// Writes a Boundary when boundary_period_s of world time has passed.
  void tick(WorldTime now);
  void finalize();

  [[nodiscard]] std::uint32_t stream_id(std::size_t index) const { return static_cast<std::uint32_t>(index + 1); }
  [[nodiscard]] std::optional<std::uint32_t> pts_stream_id(std::size_t index) const;
  [[nodiscard]] const StreamCounts& counts(std::size_t index) const { return counts_.at(index); }
  [[nodiscard]] std::size_t size() const { return streams_.size(); }
  [[nodiscard]] const StreamInfo& info(std::size_t index) const { return streams_.at(index); }
  [[nodiscard]] const std::filesystem::path& path() const { return writer_.path(); }
  [[nodiscard]] bool finalized() const { return writer_.finalized(); }

 private:
  xdf::XdfWriter writer_;
  std::vector<StreamInfo> streams_;
  std::vector<StreamCounts> counts_;
  std::vector<std::optional<std::uint32_t>> pts_ids_;
  double boundary_period_s_;
  std::optional<double> last_boundary_;
};

xdf::StreamHeaderInfo header_for(const StreamInfo& info, std::uint32_t id);

}  // namespace pesao::recorder
