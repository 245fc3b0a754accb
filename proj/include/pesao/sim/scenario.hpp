#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pesao/core/geometry.hpp"
#include "pesao/core/pose.hpp"

namespace pesao::sim {

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Limits of the lab hardware.
inline constexpr double kMaxMocapRateHz = 120.0;
inline constexpr double kMaxLightLux = 7300.0;
inline constexpr double kMinColourTempK = 3200.0;
inline constexpr double kMaxColourTempK = 5600.0;

// Tracking volume, meters: 4 x 4 floor area centred on the origin, 2 m high.
inline constexpr double kVolumeHalfExtentXY = 2.0;
inline constexpr double kVolumeHeight = 2.0;

/// device(t) = offset_s + (1 + drift_ppm * 1e-6) * t
struct SimClock {
  double offset_s = 0.0;
  double drift_ppm = 0.0;

  [[nodiscard]] double rate() const { return 1.0 + drift_ppm * 1e-6; }
  [[nodiscard]] double device(double t_true) const { return offset_s + rate() * t_true; }
  [[nodiscard]] double true_time(double device_s) const { return (device_s - offset_s) / rate(); }
};

struct LinkParams {
  double delay_s = 0.0;
  double jitter_s = 0.0;  // uniform in [-jitter, +jitter]
  double loss_prob = 0.0;
};

struct NoiseParams {
  double gaze_angular_deg = 0.0;
  double position_m = 0.0;
  double quat_angle_deg = 0.0;
};

/// Glasses frame -> tracking-body frame.
struct Calibration {
  Quaternion rotation;
  Vec3 translation;
};

struct Waypoint {
  double t = 0.0;
  Pose pose;
};

enum class GazeKind { target, object, saccade, blink };

struct GazeSegment {
  double t_start = 0.0;
  double t_end = 0.0;
  GazeKind kind = GazeKind::target;
  Vec3 target;        // kind == target
  int object_id = 0;  // kind == object
};

struct SceneObject {
  int body_id = 0;
  Vec3 center;
  double radius_m = 0.1;
  std::vector<Waypoint> waypoints;  // optional; empty = static at center
};

struct LightCue {
  double t = 0.0;
  double lux = 0.0;
  double kelvin = 4000.0;
};

struct Scenario {
  double duration_s = 10.0;
  double mocap_hz = 120.0;
  double gaze_hz = 100.0;
  std::uint64_t seed = 1;
  NoiseParams noise;
  double gaze_invalid_prob = 0.0;
  SimClock gaze_clock;
  SimClock mocap_clock;
  SimClock light_clock;
  SimClock native_clock;  // the glasses' on-device log clock
  LinkParams link;
  Calibration calibration;
  std::vector<Waypoint> head_waypoints;
  std::vector<GazeSegment> gaze_script;
  std::vector<SceneObject> objects;
  std::vector<LightCue> light_schedule;
};

/// Fills defaults and validates eagerly. Throws ScenarioError.
Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);
void validate_scenario(const Scenario& s);

/// Piecewise pose_interpolate between bracketing waypoints; clamps outside
/// the waypoint span. Returned pose is stamped with `t` on the true clock.
Pose eval_head_pose(const Scenario& s, double t);
Pose eval_object_pose(const SceneObject& o, double t);
const SceneObject* find_object(const Scenario& s, int body_id);

/// Eye position in the world: the glasses origin carried by the head pose
/// through the calibration translation.
Vec3 eye_origin_world(const Scenario& s, const Pose& head);

struct GazeTruth {
  Vec3 origin_w;
  Vec3 dir_w;
  int object_id = -1;  // scripted object, -1 when none
  bool blink = false;
};

/// Scripted world gaze ray at true time t. Gaps between segments hold the
/// previous segment's target.
GazeTruth eval_gaze(const Scenario& s, double t);

/// Glasses-frame direction that the fusion chain maps onto dir_w.
Vec3 world_to_glasses_dir(const Scenario& s, const Pose& head, const Vec3& dir_w);

/// round(duration * rate) samples at true times k / rate.
std::size_t sample_count(double duration_s, double rate_hz);

}  // namespace pesao::sim
