#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pesao/core/geometry.hpp"

namespace pesao::proc {

/// Bad or insufficient input data. The CLI maps it to exit status 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NativeGaze {
  std::int64_t ts_us = 0;
  Vec3 gd3;
  std::array<double, 2> gp{0.5, 0.5};
  bool valid = true;
};

struct NativePts {
  std::int64_t ts_us = 0;
  std::int64_t pts_us = 0;
};

struct NativeImu {
  std::int64_t ts_us = 0;
  Vec3 accel;
  Vec3 gyro;
};

/// The glasses' on-device log (gzipped NDJSON).
struct NativeGlassesLog {
  std::vector<NativeGaze> gaze;
  std::vector<NativePts> pts;
  std::vector<NativeImu> imu;
  std::size_t skipped = 0;  // malformed lines
};

/// Malformed lines are skipped and counted. Throws ValidationError for an
/// unreadable file, zero records, non-unit gd3 or ts going backwards within
/// one record kind.
NativeGlassesLog load_native_log(const std::filesystem::path& path);

enum class Label { fixation, saccade, unclassified };
std::string_view to_string(Label l);

struct EyeEvent {
  std::int64_t ts_us = 0;  // on the glasses' native clock
  Label type = Label::unclassified;
  double duration_ms = 0.0;
};

inline constexpr const char* kEyeEventTimestampColumn = "Recording timestamp";
inline constexpr const char* kEyeEventTypeColumn = "Eye movement type";
inline constexpr const char* kEyeEventDurationColumn = "Gaze event duration";

/// Tab-separated table with a header row; unknown columns are ignored.
std::vector<EyeEvent> load_eye_events(const std::filesystem::path& path);

/// Rigid transform glasses frame -> tracking-body frame.
struct CalibrationTransform {
  Quaternion rotation;
  Vec3 translation;
};

/// `rotation_wxyz` / `translation_m`, top level or under [calibration].
CalibrationTransform load_calibration(const std::filesystem::path& path);

}  // namespace pesao::proc
