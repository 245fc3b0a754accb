#include "pesao/proc/kernels.hpp"

namespace pesao::proc {

namespace {

SyncedRecord make_record(const ResampleInput& in, std::size_t i) {
  SyncedRecord r;
  r.t_world = in.t_world[i];
  r.native_ts_us = in.native_ts_us[i];
  if (auto head = sample_track(*in.head, r.t_world, in.max_gap)) {
    r.head = head;
    // the eye origin sits at the glasses origin; the native log carries no origin
    r.ray = fuse_gaze(*head, in.calibration, Vec3{}, in.dir_g[i]);
  } else {
    r.uncovered = true;
  }
  if (in.objects != nullptr) {
    for (const auto& [id, track] : *in.objects) {
      if (auto p = sample_track(track, r.t_world, in.max_gap)) r.objects.push_back({id, *p});
    }
  }
  return r;
}

}  // namespace

std::vector<SyncedRecord> resample_and_fuse(const ResampleInput& in) {
  const auto n = static_cast<std::ptrdiff_t>(in.t_world.size());
  std::vector<SyncedRecord> out(in.t_world.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = make_record(in, static_cast<std::size_t>(i));
  return out;
}

std::vector<SyncedRecord> resample_and_fuse_serial(const ResampleInput& in) {
  std::vector<SyncedRecord> out;
  out.reserve(in.t_world.size());
  for (std::size_t i = 0; i < in.t_world.size(); ++i) out.push_back(make_record(in, i));
  return out;
}

}  // namespace pesao::proc
