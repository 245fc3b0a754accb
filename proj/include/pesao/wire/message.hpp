#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pesao/core/types.hpp"

namespace pesao::wire {

inline constexpr std::size_t kMaxLineBytes = 64 * 1024;

struct DiscoverProbe {
  bool operator==(const DiscoverProbe&) const = default;
};

struct Announce {
  StreamInfo info;
  bool operator==(const Announce&) const = default;
};

/// Numeric channels for regular streams, string channels for marker streams.
using SampleValues = std::variant<std::vector<double>, std::vector<std::string>>;

struct Sample {
  DeviceTime t;
  SampleValues values;
  bool operator==(const Sample&) const = default;
};

struct TimesyncRequest {
  WorldTime t1;
  bool operator==(const TimesyncRequest&) const = default;
};

struct TimesyncReply {
  WorldTime t1;
  DeviceTime t2;
  DeviceTime t3;
  bool operator==(const TimesyncReply&) const = default;
};

/// Presentation-timestamp beacon of the glasses. `t` is the gaze stream's
/// device time at emission, `pts` the video clock in microseconds.
struct PtsBeacon {
  DeviceTime t;
  std::int64_t pts = 0;
  bool operator==(const PtsBeacon&) const = default;
};

using Message =
    std::variant<DiscoverProbe, Announce, Sample, TimesyncRequest, TimesyncReply, PtsBeacon>;

class DecodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PayloadTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// One newline-terminated JSON line; "type" first, fixed field order.
/// Throws PayloadTooLarge above 64 KiB and std::invalid_argument on
/// non-finite numbers.
std::string encode_message(const Message& m);

/// Accepts a line with or without its trailing newline. Unknown keys are
/// ignored; unknown "type" tags, missing fields and non-finite numbers throw
/// DecodeError.
Message decode_message(std::string_view line);

/// Marker streams carry [kind, payload] string channels.
Sample marker_sample(const MarkerEvent& e);
MarkerEvent marker_from_sample(const Sample& s);

}  // namespace pesao::wire
