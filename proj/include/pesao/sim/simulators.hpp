#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pesao/core/types.hpp"
#include "pesao/sim/scenario.hpp"
#include "pesao/util/io.hpp"
#include "pesao/wire/message.hpp"

namespace pesao::sim {

struct LightState {
  double intensity_lux = 0.0;
  double colour_temp_k = 4000.0;
  bool operator==(const LightState&) const = default;
};

/// Clamps to the fixture's range. Throws std::invalid_argument on
/// non-finite input.
LightState clamp_light(const LightState& requested);

struct TrialPlan {
  std::uint64_t seed = 0;
  std::vector<std::string> conditions;
  int repetitions = 1;
  std::vector<std::string> order;
  bool operator==(const TrialPlan&) const = default;
};

/// Fisher-Yates over each condition repeated `repetitions` times, driven by
/// mt19937_64(seed) with rejection sampling so the order is the same on every
/// standard library.
TrialPlan generate_trials(std::uint64_t seed, const std::vector<std::string>& conditions,
                          int repetitions);

nlohmann::json to_json(const TrialPlan& p);
TrialPlan trial_plan_from_json(const nlohmann::json& j);

// Default stream names, as the recorder lists them.
inline constexpr const char* kMocapStreamName = "OptiTrack";
inline constexpr const char* kGazeStreamName = "TobiiPTS";
inline constexpr const char* kLightStreamName = "Light";
inline constexpr const char* kControlStreamName = "Control";

struct MocapEmission {
  double t_true = 0.0;
  MocapFrame frame;  // stamped on the mocap device clock
  Pose head_truth;   // noise-free, true clock
};

/// Rigid-body frames at mocap_hz: body 1 is the head, then scene objects.
class MocapSim {
 public:
  MocapSim(const Scenario& s, std::uint64_t seed);

  [[nodiscard]] bool done() const { return k_ >= total_; }
  [[nodiscard]] std::size_t total() const { return total_; }
  [[nodiscard]] std::size_t emitted() const { return k_; }
  [[nodiscard]] double next_time() const { return static_cast<double>(k_) / s_.mocap_hz; }
  [[nodiscard]] const SimClock& clock() const { return s_.mocap_clock; }
  [[nodiscard]] int channel_count() const;
  [[nodiscard]] StreamInfo stream_info(const std::string& uid) const;

  MocapEmission next();

 private:
  RigidBodyState noisy(int id, const Pose& truth, double device_t);

  const Scenario& s_;
  std::mt19937_64 rng_;
  std::size_t total_;
  std::size_t k_ = 0;
};

struct ImuRecord {
  Vec3 accel;  // m/s^2, glasses frame, includes gravity
  Vec3 gyro;   // rad/s, glasses frame
};

struct GazeEmission {
  double t_true = 0.0;
  GazeSample sample;  // stamped on the gaze device clock
  std::int64_t native_ts_us = 0;
  std::optional<wire::PtsBeacon> beacon;
  ImuRecord imu;
  Pose head_truth;
  GazeTruth truth;
};

/// Gaze samples at gaze_hz plus a PTS beacon once per second. When a native
/// log path is given, every emission is also written there (gaze, pts and
/// imu records, gzipped newline-delimited JSON).
class GazeSim {
 public:
  GazeSim(const Scenario& s, std::uint64_t seed,
          const std::optional<std::filesystem::path>& native_log = std::nullopt);

  [[nodiscard]] bool done() const { return k_ >= total_; }
  [[nodiscard]] std::size_t total() const { return total_; }
  [[nodiscard]] std::size_t emitted() const { return k_; }
  [[nodiscard]] double next_time() const { return static_cast<double>(k_) / s_.gaze_hz; }
  [[nodiscard]] const SimClock& clock() const { return s_.gaze_clock; }
  [[nodiscard]] StreamInfo stream_info(const std::string& uid) const;

  GazeEmission next();
  /// Flushes and closes the native log.
  void finish();

 private:
  const Scenario& s_;
  std::mt19937_64 rng_;
  std::size_t total_;
  std::size_t k_ = 0;
  std::unique_ptr<util::GzLineWriter> log_;
};

struct LightEmission {
  double t_true = 0.0;
  MarkerEvent event;  // light_change, stamped on the light device clock
  LightState applied;
};

/// Replays the light schedule through clamp_light.
class LightSim {
 public:
  explicit LightSim(const Scenario& s);

  [[nodiscard]] bool done() const { return k_ >= s_.light_schedule.size(); }
  [[nodiscard]] std::size_t total() const { return s_.light_schedule.size(); }
  [[nodiscard]] std::size_t emitted() const { return k_; }
  [[nodiscard]] double next_time() const { return s_.light_schedule[k_].t; }
  [[nodiscard]] const SimClock& clock() const { return s_.light_clock; }
  [[nodiscard]] StreamInfo stream_info(const std::string& uid) const;

  LightEmission next();

 private:
  const Scenario& s_;
  std::size_t k_ = 0;
};

/// Builds the marker for a light change. The payload is
/// {"lux":..,"kelvin":..} of the applied (clamped) state.
MarkerEvent set_light(const LightState& requested, DeviceTime t, LightState* applied = nullptr);

/// Light state in effect at true time t (schedule clamped; default before
/// the first cue).
LightState light_at(const Scenario& s, double t);

/// Tab-separated ground truth, one row per emitted mocap frame or gaze
/// sample, on the true clock.
class GroundTruthWriter {
 public:
  GroundTruthWriter(const std::filesystem::path& path, const Scenario& s);
  void add(const MocapEmission& e);
  void add(const GazeEmission& e);
  void close();

  static const std::vector<std::string>& columns();

 private:
  void row(double t_true, const char* source, double device_ts, std::int64_t native_ts,
           const Pose& head, const Vec3& eye, const Vec3& ray, int object_id, bool valid);

  std::ofstream out_;
  const Scenario& s_;
};

struct GroundTruthRow {
  double t_true = 0.0;
  std::string source;
  double device_ts = 0.0;
  std::int64_t native_ts_us = -1;
  Pose head;
  Vec3 eye;
  Vec3 ray;
  int object_id = -1;
  LightState light;
  bool valid = true;
};

std::vector<GroundTruthRow> read_ground_truth(const std::filesystem::path& path);

}  // namespace pesao::sim
