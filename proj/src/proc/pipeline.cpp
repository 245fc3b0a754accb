#include "pesao/proc/pipeline.hpp"

#include <fmt/format.h>

#include "pesao/util/io.hpp"

namespace pesao::proc {

using nlohmann::json;

namespace {

json map_json(const ClockMap& m) { return {{"offset", m.offset}, {"rate", m.rate}}; }

json input_json(const std::filesystem::path& p) {
  return {{"file", p.filename().string()}, {"sha256", util::sha256_file(p)}};
}

}  // namespace

json run_process(const ProcessInputs& in, ProcessOptions opt, const std::filesystem::path& out_dir,
                 SyncedDataset* dataset_out) {
  xdf::Recording rec;
  try {
    rec = xdf::read_recording(in.xdf);
  } catch (const std::exception& e) {
    throw ValidationError(fmt::format("{}: {}", in.xdf.string(), e.what()));
  }
  const auto log = load_native_log(in.native_log);
  std::optional<std::vector<EyeEvent>> events;
  if (in.eye_events) events = load_eye_events(*in.eye_events);
  if (in.calibration) opt.calibration = load_calibration(*in.calibration);

  const auto maps = build_clock_maps(rec, log);
  auto ds = build_synced_dataset(rec, log, maps, opt, events ? &*events : nullptr);
  const auto sums = export_synced(ds, out_dir);

  json inputs{{"xdf", input_json(in.xdf)}, {"native_log", input_json(in.native_log)}};
  if (in.eye_events) inputs["eye_events"] = input_json(*in.eye_events);
  if (in.calibration) inputs["calibration"] = input_json(*in.calibration);

  json stream_maps = json::object();
  for (const auto& [name, m] : maps.streams) stream_maps[name] = map_json(m);

  std::size_t uncovered = 0;
  std::size_t invalid = 0;
  for (const auto& r : ds.records) uncovered += r.uncovered ? 1 : 0;
  for (const auto& g : log.gaze) invalid += g.valid ? 0 : 1;
  std::size_t fix = 0;
  std::size_t sac = 0;
  for (const auto& s : ds.segments) (s.label == Label::fixation ? fix : sac) += 1;
  std::size_t attached = 0;
  for (const auto& m : ds.markers) attached += m.record ? 1 : 0;

  const auto& cal = opt.calibration;
  json manifest{
      {"tool", kToolVersion},
      {"inputs", inputs},
      {"parameters",
       {{"labels", events ? "eye_events" : "ivt"},
        {"ivt_threshold_deg_s", opt.ivt.threshold_deg_s},
        {"ivt_min_fixation_ms", opt.ivt.min_fixation_ms},
        {"ivt_merge_gap_ms", opt.ivt.merge_gap_ms},
        {"ivt_merge_angle_deg", opt.ivt.merge_angle_deg},
        {"max_pose_gap_s", opt.max_pose_gap_s},
        {"marker_window_s", opt.marker_window_s},
        {"event_join_s", opt.event_join_s},
        {"calibration",
         {{"rotation_wxyz", cal.rotation.to_array()}, {"translation_m", cal.translation.to_array()}}}}},
      {"clock_maps",
       {{"streams", stream_maps},
        {"gaze_stream", maps.gaze_stream},
        {"mocap_stream", maps.mocap_stream},
        {"native_to_gaze_device", map_json(maps.native_to_gaze_device)},
        {"native_to_world", map_json(maps.native_to_world)},
        {"pts_pairs", maps.pts_pairs}}},
      {"counts",
       {{"records", ds.records.size()},
        {"uncovered", uncovered},
        {"fixation_segments", fix},
        {"saccade_segments", sac},
        {"markers", ds.markers.size()},
        {"markers_attached", attached},
        {"native_gaze", log.gaze.size()},
        {"native_invalid_gaze", invalid},
        {"native_pts", log.pts.size()},
        {"native_skipped_lines", log.skipped}}},
      {"outputs", sums}};
  util::write_file(out_dir / kManifestJson, manifest.dump(2) + "\n");
  if (dataset_out != nullptr) *dataset_out = std::move(ds);
  return manifest;
}

}  // namespace pesao::proc
