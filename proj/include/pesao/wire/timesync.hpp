#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pesao/core/time.hpp"
#include "pesao/wire/message.hpp"
#include "pesao/wire/net.hpp"

namespace pesao::wire {

/// One two-way exchange. t1/t4 are stamped by the recorder, t2/t3 by the device.
struct OffsetMeasurement {
  WorldTime t1;
  DeviceTime t2;
  DeviceTime t3;
  WorldTime t4;

  static OffsetMeasurement from_stamps(WorldTime t1, DeviceTime t2, DeviceTime t3, WorldTime t4);

  /// Device minus world, seconds.
  [[nodiscard]] double offset() const {
    return ((t2.seconds - t1.seconds) + (t3.seconds - t4.seconds)) / 2.0;
  }
  [[nodiscard]] double rtt() const {
    return (t4.seconds - t1.seconds) - (t3.seconds - t2.seconds);
  }
  /// Midpoint on the world clock; the "collection time" stored in containers.
  [[nodiscard]] double world_mid() const { return (t1.seconds + t4.seconds) / 2.0; }
  [[nodiscard]] double device_mid() const { return (t2.seconds + t3.seconds) / 2.0; }
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimesyncTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AffinePoint {
  double x;
  double y;
};

/// Least-squares y = offset + rate x. Points are sorted before summation so
/// the result does not depend on input order. Needs two distinct x values.
ClockMap fit_affine(std::span<const AffinePoint> points);

/// Drops exchanges with rtt above twice the median, then fits
/// world = a + b device through (device_mid, world_mid). Needs two survivors
/// spanning at least one second of device time.
ClockMap estimate_clock_map(std::span<const OffsetMeasurement> measurements);

/// Rebuilds a zero-rtt measurement from a stored (collection_time, offset) pair.
OffsetMeasurement measurement_from_offset(double collection_time, double offset);

/// Non-blocking bookkeeping of outstanding timesync requests on one link.
class TimesyncTracker {
 public:
  explicit TimesyncTracker(double timeout_s = 1.0) : timeout_s_(timeout_s) {}

  /// Registers a request stamped at `now` and returns its encoded line.
  std::string make_request(WorldTime now);

  /// Completes the matching request. Returns nullopt for replies that match
  /// nothing outstanding or arrived after the timeout.
  std::optional<OffsetMeasurement> on_reply(const TimesyncReply& reply, WorldTime t4);

  /// Forgets requests older than the timeout; returns how many expired.
  std::size_t expire(WorldTime now);

  [[nodiscard]] std::size_t outstanding() const { return pending_.size(); }
  [[nodiscard]] std::size_t timeouts() const { return timeouts_; }

 private:
  double timeout_s_;
  std::map<double, WorldTime> pending_;  // keyed by t1
  std::size_t timeouts_ = 0;
};

/// Blocking single exchange over an open connection. Lines that are not the
/// matching reply are handed to `on_other_line`. Throws TimesyncTimeout when
/// no reply arrives within `timeout`.
OffsetMeasurement timesync_once(LineConnection& conn, const std::function<WorldTime()>& world_now,
                                std::chrono::milliseconds timeout = std::chrono::seconds(1),
                                const std::function<void(std::string_view)>& on_other_line = {});

/// Device side: builds the reply for a request received at t2 and sent at t3.
inline TimesyncReply make_reply(const TimesyncRequest& req, DeviceTime t2, DeviceTime t3) {
  return TimesyncReply{req.t1, t2, t3};
}

}  // namespace pesao::wire
