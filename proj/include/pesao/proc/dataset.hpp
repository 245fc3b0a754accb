#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pesao/core/pose.hpp"
#include "pesao/core/time.hpp"
#include "pesao/core/types.hpp"
#include "pesao/proc/inputs.hpp"
#include "pesao/proc/ivt.hpp"
#include "pesao/xdf/xdf.hpp"

namespace pesao::proc {

inline constexpr const char* kToolVersion = "pesao 0.1.0";

struct ClockMaps {
  std::map<std::string, ClockMap> streams;  // by stream name, device -> world
  ClockMap native_to_gaze_device;
  ClockMap native_to_world;
  std::string gaze_stream;
  std::string mocap_stream;
  std::size_t pts_pairs = 0;
};

/// Per-stream maps from the stored clock offsets; the glasses' native clock
/// is chained through the PTS join onto the gaze stream's device clock.
/// Control streams are stamped on the world clock and map to identity.
ClockMaps build_clock_maps(const xdf::Recording& rec, const NativeGlassesLog& log);

/// origin_w = head.p + R_head (R_gb origin_g + p_gb); dir_w = R_head R_gb dir_g.
struct GazeRay {
  Vec3 origin;
  Vec3 dir;
};
GazeRay fuse_gaze(const Pose& head, const CalibrationTransform& cal, const Vec3& origin_g, const Vec3& dir_g);

struct ObjectPose {
  int body_id = 0;
  Pose pose;
};

struct SyncedRecord {
  double t_world = 0.0;
  std::int64_t native_ts_us = 0;
  std::optional<Pose> head;  // absent when uncovered
  std::optional<GazeRay> ray;
  Label label = Label::unclassified;
  bool uncovered = false;
  std::vector<ObjectPose> objects;
};

struct SyncedMarker {
  double t_world = 0.0;
  std::string stream;
  MarkerKind kind = MarkerKind::note;
  std::string payload;
  std::optional<std::size_t> record;  // nearest record within the window
};

struct SyncedDataset {
  std::vector<SyncedRecord> records;
  std::vector<SyncedMarker> markers;
  std::vector<Segment> segments;
};

struct ProcessOptions {
  CalibrationTransform calibration;
  IvtParams ivt;
  double max_pose_gap_s = 0.1;   // wider mocap holes leave records uncovered
  double marker_window_s = 0.05;
  double event_join_s = 0.010;
  bool parallel = true;
};

/// Pose time series of one rigid body on the world clock.
struct BodyTrack {
  std::vector<double> t;
  std::vector<Pose> poses;
};
/// Mocap frames grouped per body id and mapped to world time.
std::map<int, BodyTrack> body_tracks(const xdf::StreamData& mocap, const ClockMap& map);

/// Interpolated pose at `t`, or nullopt outside coverage or across a hole
/// wider than `max_gap`. Exact frame times return that frame's pose.
std::optional<Pose> sample_track(const BodyTrack& track, double t, double max_gap);

SyncedDataset build_synced_dataset(const xdf::Recording& rec, const NativeGlassesLog& log, const ClockMaps& maps,
                                   const ProcessOptions& opt, const std::vector<EyeEvent>* events = nullptr);

/// Nearest record within `window`; ties go to the earlier record.
std::optional<std::size_t> nearest_record(std::span<const double> t, double x, double window);

inline constexpr const char* kSyncedCsv = "synced.csv";
inline constexpr const char* kMarkersCsv = "markers.csv";
inline constexpr const char* kObjectsCsv = "objects.csv";
inline constexpr const char* kManifestJson = "manifest.json";

/// Writes synced.csv, markers.csv and objects.csv. Returns their sha256 by file name.
std::map<std::string, std::string> export_synced(const SyncedDataset& ds, const std::filesystem::path& out_dir);
/// Reads the three CSVs back. Segments are rebuilt from the label runs.
SyncedDataset import_synced(const std::filesystem::path& dir);

const std::vector<std::string>& synced_columns();

}  // namespace pesao::proc
