#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pesao/core/geometry.hpp"
#include "pesao/core/pose.hpp"
#include "pesao/core/time.hpp"

namespace pesao {

struct GazeSample {
  DeviceTime t;
  Vec3 origin_g;              // glasses frame, meters
  Vec3 dir_g{0.0, 0.0, 1.0};  // glasses frame, unit
  std::array<double, 2> gaze2d{0.5, 0.5};
  bool valid = true;

  /// Wire channel layout: ox oy oz dx dy dz u v valid.
  static constexpr std::size_t kChannels = 9;
  [[nodiscard]] std::vector<double> to_channels() const;
  static GazeSample from_channels(DeviceTime t, const std::vector<double>& ch);
};

struct RigidBodyState {
  int body_id = 0;
  Pose pose;
  double mean_marker_error = 0.0;
};

inline constexpr std::size_t kMaxTrackedBodies = 10;
/// Per-body channel layout: id px py pz qw qx qy qz err.
inline constexpr std::size_t kChannelsPerBody = 9;

struct MocapFrame {
  DeviceTime t;
  std::vector<RigidBodyState> bodies;

  [[nodiscard]] std::vector<double> to_channels() const;
  static MocapFrame from_channels(DeviceTime t, const std::vector<double>& ch);
};

enum class MarkerKind { trial_start, trial_end, note, answer, light_change };

std::string_view to_string(MarkerKind k);
std::optional<MarkerKind> marker_kind_from_string(std::string_view s);

inline constexpr std::size_t kMaxMarkerPayload = 4096;

struct MarkerEvent {
  DeviceTime t;
  MarkerKind kind = MarkerKind::note;
  std::string payload;

  /// Throws std::invalid_argument for oversize or non-UTF-8 payloads.
  void validate() const;
};

bool is_valid_utf8(std::string_view s);

enum class StreamType { mocap, gaze, control, light };

std::string_view to_string(StreamType t);
std::optional<StreamType> stream_type_from_string(std::string_view s);

struct StreamInfo {
  std::string uid;
  std::string name;
  StreamType type = StreamType::mocap;
  double nominal_rate_hz = 0.0;  // 0 = irregular
  int channel_count = 0;
  std::string host;
  int port = 0;

  bool operator==(const StreamInfo&) const = default;
};

}  // namespace pesao
