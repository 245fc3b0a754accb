#pragma once

#include <compare>

namespace pesao {

/// Seconds on a device's local monotonic clock.
struct DeviceTime {
  double seconds = 0.0;
  constexpr auto operator<=>(const DeviceTime&) const = default;
};

/// Seconds on the recorder's reference clock.
struct WorldTime {
  double seconds = 0.0;
  constexpr auto operator<=>(const WorldTime&) const = default;
};

/// Affine map world = offset + rate * device.
struct ClockMap {
  double offset = 0.0;
  double rate = 1.0;

  static constexpr ClockMap identity() { return {0.0, 1.0}; }

  /// Rate must lie in (0.9, 1.1) and both terms be finite.
  [[nodiscard]] bool valid() const;

  [[nodiscard]] constexpr WorldTime apply(DeviceTime t) const {
    return {offset + rate * t.seconds};
  }
  [[nodiscard]] constexpr DeviceTime inverse(WorldTime w) const {
    return {(w.seconds - offset) / rate};
  }
  /// this ∘ inner: first `inner`, then this map.
  [[nodiscard]] constexpr ClockMap compose(const ClockMap& inner) const {
    return {offset + rate * inner.offset, rate * inner.rate};
  }
  constexpr bool operator==(const ClockMap&) const = default;
};

inline constexpr WorldTime clock_apply(const ClockMap& m, DeviceTime t) { return m.apply(t); }

}  // namespace pesao
