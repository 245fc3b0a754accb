#include "pesao/wire/timesync.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pesao::wire {

OffsetMeasurement OffsetMeasurement::from_stamps(WorldTime t1, DeviceTime t2, DeviceTime t3,
                                                 WorldTime t4) {
  if (t4 < t1) throw std::invalid_argument("timesync: t4 precedes t1");
  if (t3 < t2) throw std::invalid_argument("timesync: t3 precedes t2");
  return {t1, t2, t3, t4};
}

ClockMap fit_affine(std::span<const AffinePoint> points) {
  if (points.size() < 2) throw InsufficientData("affine fit needs at least 2 points");
  std::vector<AffinePoint> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(),
            [](const AffinePoint& a, const AffinePoint& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });

  const double n = static_cast<double>(p.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& q : p) {
    mx += q.x;
    my += q.y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& q : p) {
    const double dx = q.x - mx;
    sxx += dx * dx;
    sxy += dx * (q.y - my);
  }
  if (!(sxx > 0.0)) throw InsufficientData("affine fit needs two distinct abscissae");
  const double rate = sxy / sxx;
  return ClockMap{my - rate * mx, rate};
}

ClockMap estimate_clock_map(std::span<const OffsetMeasurement> measurements) {
  if (measurements.size() < 2) {
    throw InsufficientData("clock map needs at least 2 measurements, got " +
                           std::to_string(measurements.size()));
  }
  std::vector<double> rtts;
  rtts.reserve(measurements.size());
  for (const auto& m : measurements) rtts.push_back(m.rtt());
  std::sort(rtts.begin(), rtts.end());
  const std::size_t n = rtts.size();
  const double median = n % 2 == 1 ? rtts[n / 2] : (rtts[n / 2 - 1] + rtts[n / 2]) / 2.0;
  const double limit = 2.0 * median;

  std::vector<AffinePoint> pts;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& m : measurements) {
    if (m.rtt() > limit) continue;
    pts.push_back({m.device_mid(), m.world_mid()});
    lo = std::min(lo, m.device_mid());
    hi = std::max(hi, m.device_mid());
  }
  if (pts.size() < 2) {
    throw InsufficientData("clock map needs 2 measurements after rtt filtering, got " +
                           std::to_string(pts.size()));
  }
  if (hi - lo < 1.0) {
    throw InsufficientData("clock map measurements span " + std::to_string(hi - lo) +
                           " s of device time, need at least 1 s");
  }
  return fit_affine(pts);
}

OffsetMeasurement measurement_from_offset(double collection_time, double offset) {
  const double device = collection_time + offset;
  return {WorldTime{collection_time}, DeviceTime{device}, DeviceTime{device},
          WorldTime{collection_time}};
}

std::string TimesyncTracker::make_request(WorldTime now) {
  pending_[now.seconds] = now;
  return encode_message(TimesyncRequest{now});
}

std::optional<OffsetMeasurement> TimesyncTracker::on_reply(const TimesyncReply& reply,
                                                           WorldTime t4) {
  const auto it = pending_.find(reply.t1.seconds);
  if (it == pending_.end()) return std::nullopt;
  pending_.erase(it);
  if (t4.seconds - reply.t1.seconds > timeout_s_) {
    ++timeouts_;
    return std::nullopt;
  }
  if (t4 < reply.t1 || reply.t3 < reply.t2) return std::nullopt;
  return OffsetMeasurement{reply.t1, reply.t2, reply.t3, t4};
}

std::size_t TimesyncTracker::expire(WorldTime now) {
  std::size_t n = 0;
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (now.seconds - it->first > timeout_s_) {
      it = pending_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  timeouts_ += n;
  return n;
}


OffsetMeasurement timesync_once(LineConnection& conn, const std::function<WorldTime()>& world_now,
                                std::chrono::milliseconds timeout,
                                const std::function<void(std::string_view)>& on_other_line) {
  TimesyncTracker tracker(std::chrono::duration<double>(timeout).count());
  const WorldTime t1 = world_now();
  conn.write_line(tracker.make_request(t1));
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) break;
    const auto line = conn.read_line(left);
    if (!line) break;
    const WorldTime t4 = world_now();
    try {
      const Message m = decode_message(*line);
      if (const auto* rep = std::get_if<TimesyncReply>(&m)) {
        if (auto meas = tracker.on_reply(*rep, t4)) return *meas;
        continue;
      }
    } catch (const DecodeError&) {
    }
    if (on_other_line) on_other_line(*line);
  }
  throw TimesyncTimeout("timesync: no reply within " + std::to_string(timeout.count()) + " ms");
}

}  // namespace pesao::wire
