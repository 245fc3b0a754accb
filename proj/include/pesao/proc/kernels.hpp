#pragma once

#include <map>
#include <vector>

#include "pesao/proc/dataset.hpp"

namespace pesao::proc {

struct ResampleInput {
  std::vector<double> t_world;
  std::vector<std::int64_t> native_ts_us;
  std::vector<Vec3> dir_g;
  const BodyTrack* head = nullptr;
  const std::map<int, BodyTrack>* objects = nullptr;  // without the head
  CalibrationTransform calibration;
  double max_gap = 0.1;
};

/// Per-record head/object interpolation and gaze fusion. Records are
/// independent; the OpenMP version writes the same values to the same slots
/// as the serial reference.
std::vector<SyncedRecord> resample_and_fuse(const ResampleInput& in);
std::vector<SyncedRecord> resample_and_fuse_serial(const ResampleInput& in);

}  // namespace pesao::proc
