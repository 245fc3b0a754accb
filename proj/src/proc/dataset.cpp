#include "pesao/proc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "pesao/proc/kernels.hpp"
#include "pesao/util/io.hpp"
#include "pesao/wire/timesync.hpp"

namespace pesao::proc {

namespace fs = std::filesystem;

namespace {

const xdf::StreamData* first_of_type(const xdf::Recording& rec, const std::string& type) {
  for (const auto& s : rec.streams) {
    if (s.header.type_tag == type) return &s;
  }
  return nullptr;
}

ClockMap map_from_offsets(const xdf::StreamData& s) {
  std::vector<wire::OffsetMeasurement> m;
  m.reserve(s.clock_offsets.size());
  for (const auto& o : s.clock_offsets) m.push_back(wire::measurement_from_offset(o.collection_time, o.offset));
  return wire::estimate_clock_map(m);
}

}  // namespace

ClockMaps build_clock_maps(const xdf::Recording& rec, const NativeGlassesLog& log) {
  ClockMaps maps;
  const auto* gaze = first_of_type(rec, "gaze");
  const auto* mocap = first_of_type(rec, "mocap");
  if (gaze == nullptr) throw ValidationError("container has no gaze stream");
  if (mocap == nullptr) throw ValidationError("container has no mocap stream");
  maps.gaze_stream = gaze->header.name;
  maps.mocap_stream = mocap->header.name;

  for (const auto& s : rec.streams) {
    const auto& type = s.header.type_tag;
    if (type == "pts") continue;
    if (type == "control") {
      maps.streams[s.header.name] = ClockMap::identity();
      continue;
    }
    const bool required = &s == gaze || &s == mocap || !s.samples.empty();
    try {
      const ClockMap m = map_from_offsets(s);
      if (!m.valid()) throw wire::InsufficientData("implausible clock rate");
      maps.streams[s.header.name] = m;
    } catch (const wire::InsufficientData& e) {
      if (required) {
        throw ValidationError(fmt::format("stream {}: insufficient clock offsets ({})", s.header.name, e.what()));
      }
    }
  }

  const xdf::StreamData* pts = nullptr;
  for (const auto& s : rec.streams) {
    if (s.header.type_tag == "pts" && s.header.metadata.value("companion_of", 0U) == gaze->header.stream_id) {
      pts = &s;
    }
  }
  if (pts == nullptr) throw ValidationError(fmt::format("no PTS stream recorded for {}", gaze->header.name));
  std::map<std::int64_t, double> device_of_pts;
  for (const auto& smp : pts->samples) {
    const auto& v = std::get<std::vector<double>>(smp.values);
    if (v.size() == 1) device_of_pts.emplace(std::llround(v[0]), smp.timestamp);
  }
  std::vector<wire::AffinePoint> pairs;
  for (const auto& p : log.pts) {
    const auto it = device_of_pts.find(p.pts_us);
    if (it != device_of_pts.end()) pairs.push_back({static_cast<double>(p.ts_us) * 1e-6, it->second});
  }
  maps.pts_pairs = pairs.size();
  try {
    maps.native_to_gaze_device = wire::fit_affine(pairs);
  } catch (const wire::InsufficientData&) {
    throw ValidationError(fmt::format("insufficient pts pairs: {} matched, need 2", pairs.size()));
  }
  if (!maps.native_to_gaze_device.valid()) throw ValidationError("pts join gives an implausible clock rate");
  maps.native_to_world = maps.streams.at(maps.gaze_stream).compose(maps.native_to_gaze_device);
  return maps;
}

GazeRay fuse_gaze(const Pose& head, const CalibrationTransform& cal, const Vec3& origin_g, const Vec3& dir_g) {
  GazeRay r;
  r.origin = head.position + quat_rotate(head.orientation, quat_rotate(cal.rotation, origin_g) + cal.translation);
  r.dir = quat_rotate(head.orientation, quat_rotate(cal.rotation, dir_g)).normalized();
  return r;
}

std::map<int, BodyTrack> body_tracks(const xdf::StreamData& mocap, const ClockMap& map) {
  std::map<int, BodyTrack> out;
  for (const auto& smp : mocap.samples) {
    const auto frame = MocapFrame::from_channels(DeviceTime{smp.timestamp}, std::get<std::vector<double>>(smp.values));
    const double t = map.apply(frame.t).seconds;
    for (const auto& b : frame.bodies) {
      auto& track = out[b.body_id];
      if (!track.t.empty() && !(t > track.t.back())) continue;  // keep world time strictly increasing
      Pose p = b.pose;
      p.t = t;
      p.domain = TimeDomain::world;
      track.t.push_back(t);
      track.poses.push_back(p);
    }
  }
  return out;
}

std::optional<Pose> sample_track(const BodyTrack& track, double t, double max_gap) {
  if (track.t.empty() || t < track.t.front() || t > track.t.back()) return std::nullopt;
  const auto k = static_cast<std::size_t>(std::upper_bound(track.t.begin(), track.t.end(), t) - track.t.begin());
  if (track.t[k - 1] == t) return track.poses[k - 1];
  if (track.t[k] - track.t[k - 1] > max_gap) return std::nullopt;
  return pose_interpolate(track.poses[k - 1], track.poses[k], t);
}

std::optional<std::size_t> nearest_record(std::span<const double> t, double x, double window) {
  if (t.empty()) return std::nullopt;
  const auto k = static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), x) - t.begin());
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (const std::size_t c : {k == 0 ? k : k - 1, k}) {
    if (c >= t.size()) continue;
    const double d = std::abs(t[c] - x);
    if (d <= window && (!best || d < best_d)) {
      best = c;
      best_d = d;
    }
  }
  return best;
}

SyncedDataset build_synced_dataset(const xdf::Recording& rec, const NativeGlassesLog& log, const ClockMaps& maps,
                                   const ProcessOptions& opt, const std::vector<EyeEvent>* events) {
  const auto* mocap = rec.find_by_name(maps.mocap_stream);
  if (mocap == nullptr) throw ValidationError("mocap stream vanished from the recording");
  auto tracks = body_tracks(*mocap, maps.streams.at(maps.mocap_stream));
  const auto head_it = tracks.find(1);
  if (head_it == tracks.end()) throw ValidationError("mocap stream has no head body (id 1)");
  const BodyTrack head = head_it->second;
  tracks.erase(head_it);

  ResampleInput in;
  for (const auto& g : log.gaze) {
    if (!g.valid) continue;
    const double t = maps.native_to_world.apply(DeviceTime{static_cast<double>(g.ts_us) * 1e-6}).seconds;
    if (!in.t_world.empty() && !(t > in.t_world.back())) {
      throw ValidationError(fmt::format("native gaze timestamps are not strictly increasing at ts {}", g.ts_us));
    }
    in.t_world.push_back(t);
    in.native_ts_us.push_back(g.ts_us);
    in.dir_g.push_back(g.gd3);
  }
  if (in.t_world.size() < 2) throw ValidationError("fewer than two valid gaze records");
  in.head = &head;
  in.objects = &tracks;
  in.calibration = opt.calibration;
  in.max_gap = opt.max_pose_gap_s;

  SyncedDataset ds;
  ds.records = opt.parallel ? resample_and_fuse(in) : resample_and_fuse_serial(in);

  std::vector<Label> labels(ds.records.size(), Label::unclassified);
  if (events != nullptr) {
    std::vector<double> ev_t;
    ev_t.reserve(events->size());
    for (const auto& e : *events) ev_t.push_back(static_cast<double>(e.ts_us) * 1e-6);
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (!ds.records[i].ray) continue;
      const double x = static_cast<double>(ds.records[i].native_ts_us) * 1e-6;
      if (const auto k = nearest_record(ev_t, x, opt.event_join_s)) labels[i] = (*events)[*k].type;
    }
    ds.segments = segments_from_labels(in.t_world, labels);
  } else {
    std::vector<std::optional<Vec3>> dirs(ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
      if (ds.records[i].ray) dirs[i] = ds.records[i].ray->dir;
    }
    auto ivt = classify_ivt(in.t_world, dirs, opt.ivt);
    labels = std::move(ivt.labels);
    ds.segments = std::move(ivt.segments);
  }
  for (std::size_t i = 0; i < ds.records.size(); ++i) ds.records[i].label = labels[i];

  for (const auto& s : rec.streams) {
    if (s.header.channel_format != xdf::ChannelFormat::string) continue;
    const auto map_it = maps.streams.find(s.header.name);
    if (map_it == maps.streams.end()) continue;
    for (const auto& smp : s.samples) {
      const auto& v = std::get<std::vector<std::string>>(smp.values);
      if (v.size() != 2) continue;
      const auto kind = marker_kind_from_string(v[0]);
      if (!kind) continue;
      SyncedMarker m;
      m.t_world = map_it->second.apply(DeviceTime{smp.timestamp}).seconds;
      m.stream = s.header.name;
      m.kind = *kind;
      m.payload = v[1];
      m.record = nearest_record(in.t_world, m.t_world, opt.marker_window_s);
      ds.markers.push_back(std::move(m));
    }
  }
  std::stable_sort(ds.markers.begin(), ds.markers.end(),
                   [](const SyncedMarker& a, const SyncedMarker& b) { return a.t_world < b.t_world; });
  return ds;
}

// ---- CSV export / import

const std::vector<std::string>& synced_columns() {
  static const std::vector<std::string> cols{
      "t_world_s", "head_px", "head_py", "head_pz", "head_qw", "head_qx", "head_qy", "head_qz", "gaze_ox",
      "gaze_oy",   "gaze_oz", "gaze_dx", "gaze_dy", "gaze_dz", "label",   "uncovered"};
  return cols;
}

namespace {

const std::vector<std::string> kMarkerColumns{"t_world_s", "stream", "kind", "payload", "record_index"};
const std::vector<std::string> kObjectColumns{"record_index", "t_world_s", "body_id", "px", "py",
                                              "pz",           "qw",        "qx",      "qy", "qz"};

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    out += v[i];
  }
  return out;
}

void append_vec(std::string& line, const Vec3& v) {
  for (const double x : v.to_array()) line += ',' + util::fmt17(x);
}
void append_quat(std::string& line, const Quaternion& q) {
  for (const double x : q.to_array()) line += ',' + util::fmt17(x);
}

std::string write_csv(const fs::path& path, const std::string& content) {
  util::write_file(path, content);
  return util::sha256_bytes(content);
}

double parse_double(const std::string& s, const fs::path& file, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) {
    throw ValidationError(fmt::format("{} line {}: bad number \"{}\"", file.filename().string(), line, s));
  }
  return v;
}

struct CsvTable {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& columns) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  std::string line;
  if (!std::getline(in, line) || util::csv_split(line) != columns) {
    throw ValidationError(fmt::format("{} has an unexpected header", path.filename().string()));
  }
  CsvTable t;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = util::csv_split(line);
    if (f.size() != columns.size()) {
      throw ValidationError(fmt::format("{} line {} has {} fields", path.filename().string(), n, f.size()));
    }
    t.rows.push_back(std::move(f));
    t.line_numbers.push_back(n);
  }
  return t;
}

Label label_from(const std::string& s) {
  if (s == "Fixation") return Label::fixation;
  if (s == "Saccade") return Label::saccade;
  if (s == "Unclassified") return Label::unclassified;
  throw ValidationError("unknown label " + s);
}

}  // namespace

std::map<std::string, std::string> export_synced(const SyncedDataset& ds, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw ValidationError(fmt::format("cannot create {}", out_dir.string()));

  std::string synced = join(synced_columns()) + '\n';
  std::string objects = join(kObjectColumns) + '\n';
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    std::string line = util::fmt17(r.t_world);
    if (r.head) {
      append_vec(line, r.head->position);
      append_quat(line, r.head->orientation);
    } else {
      line += ",,,,,,,";
    }
    if (r.ray) {
      append_vec(line, r.ray->origin);
      append_vec(line, r.ray->dir);
    } else {
      line += ",,,,,,";
    }
    line += ',';
    line += to_string(r.label);
    line += r.uncovered ? ",1\n" : ",0\n";
    synced += line;
    for (const auto& o : r.objects) {
      std::string ol = fmt::format("{},{},{}", i, util::fmt17(r.t_world), o.body_id);
      append_vec(ol, o.pose.position);
      append_quat(ol, o.pose.orientation);
      objects += ol + '\n';
    }
  }
  std::string markers = join(kMarkerColumns) + '\n';
  for (const auto& m : ds.markers) {
    markers += fmt::format("{},{},{},{},{}\n", util::fmt17(m.t_world), util::csv_field(m.stream),
                           to_string(m.kind), util::csv_field(m.payload),
                           m.record ? std::to_string(*m.record) : std::string());
  }

  std::map<std::string, std::string> sums;
  sums[kSyncedCsv] = write_csv(out_dir / kSyncedCsv, synced);
  sums[kMarkersCsv] = write_csv(out_dir / kMarkersCsv, markers);
  sums[kObjectsCsv] = write_csv(out_dir / kObjectsCsv, objects);
  return sums;
}

SyncedDataset import_synced(const fs::path& dir) {
  SyncedDataset ds;
  const fs::path synced_path = dir / kSyncedCsv;
  const auto synced = read_csv(synced_path, synced_columns());
  for (std::size_t k = 0; k < synced.rows.size(); ++k) {
    const auto& f = synced.rows[k];
    const std::size_t ln = synced.line_numbers[k];
    const auto num = [&](std::size_t c) { return parse_double(f[c], synced_path, ln); };
    SyncedRecord r;
    r.t_world = num(0);
    if (!f[1].empty()) {
      Pose p;
      p.position = {num(1), num(2), num(3)};
      p.orientation = {num(4), num(5), num(6), num(7)};
      p.t = r.t_world;
      p.domain = TimeDomain::world;
      r.head = p;
    }
    if (!f[8].empty()) r.ray = GazeRay{{num(8), num(9), num(10)}, {num(11), num(12), num(13)}};
    r.label = label_from(f[14]);
    r.uncovered = f[15] == "1";
    if (!ds.records.empty() && !(r.t_world > ds.records.back().t_world)) {
      throw ValidationError(fmt::format("synced.csv line {}: t_world_s is not increasing", ln));
    }
    ds.records.push_back(std::move(r));
  }

  const fs::path objects_path = dir / kObjectsCsv;
  const auto objects = read_csv(objects_path, kObjectColumns);
  for (std::size_t k = 0; k < objects.rows.size(); ++k) {
    const auto& f = objects.rows[k];
    const auto num = [&](std::size_t c) { return parse_double(f[c], objects_path, objects.line_numbers[k]); };
    const auto idx = static_cast<std::size_t>(num(0));
    if (idx >= ds.records.size()) throw ValidationError("objects.csv refers to a missing record");
    ObjectPose o;
    o.body_id = static_cast<int>(num(2));
    o.pose.position = {num(3), num(4), num(5)};
    o.pose.orientation = {num(6), num(7), num(8), num(9)};
    o.pose.t = num(1);
    o.pose.domain = TimeDomain::world;
    ds.records[idx].objects.push_back(o);
  }

  const fs::path markers_path = dir / kMarkersCsv;
  if (fs::exists(markers_path)) {
    const auto markers = read_csv(markers_path, kMarkerColumns);
    for (std::size_t k = 0; k < markers.rows.size(); ++k) {
      const auto& f = markers.rows[k];
      SyncedMarker m;
      m.t_world = parse_double(f[0], markers_path, markers.line_numbers[k]);
      m.stream = f[1];
      const auto kind = marker_kind_from_string(f[2]);
      if (!kind) throw ValidationError("markers.csv: unknown kind " + f[2]);
      m.kind = *kind;
      m.payload = f[3];
      if (!f[4].empty()) m.record = static_cast<std::size_t>(parse_double(f[4], markers_path, 0));
      ds.markers.push_back(std::move(m));
    }
  }

  std::vector<double> t;
  std::vector<Label> labels;
  for (const auto& r : ds.records) {
    t.push_back(r.t_world);
    labels.push_back(r.label);
  }
  ds.segments = segments_from_labels(t, labels);
  return ds;
}

}  // namespace pesao::proc
