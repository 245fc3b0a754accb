#include "pesao/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "pesao/eval/kernels.hpp"
#include "pesao/util/io.hpp"
#include "pesao/util/toml_lite.hpp"

namespace pesao::eval {

namespace fs = std::filesystem;

void check_params(const FrustumParams& p) {
  const auto fov_ok = [](double f) { return f > 0.0 && f < 180.0; };
  if (!fov_ok(p.hfov_deg) || !fov_ok(p.vfov_deg)) throw EvalError("field of view must lie in (0, 180) degrees");
  if (!(p.near_m > 0.0) || !(p.far_m > p.near_m)) throw EvalError("frustum needs 0 < near < far");
}

Frustum compute_frustum(const Pose& head, const FrustumParams& p, double t_world) {
  check_params(p);
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double tx = std::tan(p.hfov_deg * kDeg / 2.0);
  const double ty = std::tan(p.vfov_deg * kDeg / 2.0);
  Frustum f;
  f.apex = head;
  f.params = p;
  f.t_world = t_world;
  const double planes[2] = {p.near_m, p.far_m};
  for (int k = 0; k < 2; ++k) {
    const double z = planes[k];
    const Vec3 local[4] = {{-z * tx, -z * ty, z}, {z * tx, -z * ty, z}, {z * tx, z * ty, z}, {-z * tx, z * ty, z}};
    for (int c = 0; c < 4; ++c) f.corners[static_cast<std::size_t>(4 * k + c)] = head.transform_point(local[c]);
  }
  return f;
}

const std::array<std::array<int, 2>, 12>& frustum_edges() {
  static const std::array<std::array<int, 2>, 12> edges{{{0, 1},
                                                          {1, 2},
                                                          {2, 3},
                                                          {3, 0},
                                                          {4, 5},
                                                          {5, 6},
                                                          {6, 7},
                                                          {7, 4},
                                                          {0, 4},
                                                          {1, 5},
                                                          {2, 6},
                                                          {3, 7}}};
  return edges;
}

std::array<int, 3> temporal_color(double t, double t0, double t1) {
  const double u = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
  const auto round_half_up = [](double x) { return static_cast<int>(std::floor(x + 0.5)); };
  return {round_half_up(255.0 * u), 0, round_half_up(255.0 * (1.0 - u))};
}

std::vector<ObjectSpec> load_objects(const fs::path& path) {
  nlohmann::json j;
  try {
    j = toml::parse_file(path);
  } catch (const std::exception& e) {
    throw EvalError(fmt::format("objects {}: {}", path.string(), e.what()));
  }
  if (!j.contains("objects") || !j.at("objects").is_array()) throw EvalError("objects file needs [[objects]] tables");
  std::vector<ObjectSpec> out;
  std::set<int> seen;
  for (const auto& o : j.at("objects")) {
    ObjectSpec s;
    if (!o.contains("body_id") || !o.at("body_id").is_number_integer()) {
      throw EvalError("each object needs an integer body_id");
    }
    s.body_id = o.at("body_id").get<int>();
    if (o.contains("radius_m")) s.radius_m = o.at("radius_m").get<double>();
    s.name = o.value("name", fmt::format("body{}", s.body_id));
    if (!(s.radius_m > 0.0)) throw EvalError(fmt::format("object {} needs a positive radius", s.body_id));
    if (!seen.insert(s.body_id).second) throw EvalError(fmt::format("duplicate object body_id {}", s.body_id));
    out.push_back(s);
  }
  return out;
}

std::pair<double, bool> ray_point_distance(const Vec3& origin, const Vec3& dir, const Vec3& center) {
  const Vec3 v = center - origin;
  const double s = v.dot(dir);
  return {(v - dir * s).norm(), s > 0.0};
}

namespace {

std::vector<double> times_of(const proc::SyncedDataset& ds) {
  std::vector<double> t;
  t.reserve(ds.records.size());
  for (const auto& r : ds.records) t.push_back(r.t_world);
  return t;
}

/// Time a record stands for: up to its successor, or one median interval
/// before a gap. Matches how segment ends are drawn.
std::vector<double> record_intervals(const std::vector<double>& t) {
  const double md = proc::median_interval(t);
  std::vector<double> dt(t.size(), md);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (t[i + 1] - t[i] <= proc::kGapFactor * md) dt[i] = t[i + 1] - t[i];
  }
  return dt;
}

}  // namespace

HitResult gaze_object_hits(const proc::SyncedDataset& ds, const std::vector<ObjectSpec>& objects) {
  std::set<int> present;
  for (const auto& r : ds.records) {
    for (const auto& o : r.objects) present.insert(o.body_id);
  }
  for (const auto& o : objects) {
    if (!present.contains(o.body_id)) throw EvalError(fmt::format("unknown body_id {}", o.body_id));
  }
  HitResult out;
  out.hits = compute_hits(ds, objects);
  const auto dt = record_intervals(times_of(ds));
  for (const auto& o : objects) out.dwell_ms[o.body_id] = 0.0;
  for (const auto& h : out.hits) {
    if (h.hit && ds.records[h.record].label == proc::Label::fixation) out.dwell_ms[h.body_id] += dt[h.record] * 1e3;
  }
  return out;
}

SummaryStats fixation_stats(const proc::SyncedDataset& ds) {
  SummaryStats s;
  std::vector<double> durations;
  for (const auto& seg : ds.segments) {
    if (seg.label == proc::Label::fixation) {
      durations.push_back(seg.duration_ms());
    } else if (seg.label == proc::Label::saccade) {
      ++s.saccade_count;
    }
  }
  s.fixation_count = durations.size();
  for (const double d : durations) s.fixation_total_ms += d;
  if (!durations.empty()) {
    s.fixation_mean_ms = s.fixation_total_ms / static_cast<double>(durations.size());
    std::sort(durations.begin(), durations.end());
    const std::size_t m = durations.size() / 2;
    s.fixation_median_ms = durations.size() % 2 == 1 ? durations[m] : (durations[m - 1] + durations[m]) / 2.0;
  }
  return s;
}

std::map<std::string, std::string> export_artifacts(const proc::SyncedDataset& ds,
                                                    const std::vector<ObjectSpec>& objects, const fs::path& out_dir,
                                                    const FrustumParams& p, std::size_t stride) {
  check_params(p);
  if (ds.records.empty()) throw EvalError("dataset is empty");
  if (stride == 0) throw EvalError("stride must be at least 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw EvalError(fmt::format("cannot create {}", out_dir.string()));

  std::vector<std::size_t> picked;
  for (std::size_t i = 0; i < ds.records.size(); i += stride) {
    if (ds.records[i].head) picked.push_back(i);
  }
  const auto frusta = compute_frusta(ds, picked, p);
  const double t0 = ds.records.front().t_world;
  const double t1 = ds.records.back().t_world;

  std::string obj = fmt::format("# {} frusta, hfov {} vfov {} near {} far {}\nmtllib frusta.mtl\n", frusta.size(),
                                util::fmt17(p.hfov_deg), util::fmt17(p.vfov_deg), util::fmt17(p.near_m),
                                util::fmt17(p.far_m));
  std::string mtl = "# temporal colour, blue (start) to red (end)\n";
  for (std::size_t k = 0; k < frusta.size(); ++k) {
    const auto& f = frusta[k];
    const auto rgb = temporal_color(f.t_world, t0, t1);
    mtl += fmt::format("newmtl frustum_{}\nKd {} {} {}\n", k, util::fmt17(rgb[0] / 255.0), util::fmt17(rgb[1] / 255.0),
                       util::fmt17(rgb[2] / 255.0));
    obj += fmt::format("o frustum_{}\nusemtl frustum_{}\n", k, k);
    for (const auto& c : f.corners) {
      obj += fmt::format("v {} {} {}\n", util::fmt17(c.x), util::fmt17(c.y), util::fmt17(c.z));
    }
    const std::size_t base = 8 * k + 1;
    for (const auto& e : frustum_edges()) {
      obj += fmt::format("l {} {}\n", base + static_cast<std::size_t>(e[0]), base + static_cast<std::size_t>(e[1]));
    }
  }

  const auto hits = gaze_object_hits(ds, objects);
  std::string hits_csv = "t_world_s,record_index,body_id,in_front,hit,distance_m\n";
  for (const auto& h : hits.hits) {
    hits_csv += fmt::format("{},{},{},{},{},{}\n", util::fmt17(h.t_world), h.record, h.body_id, h.in_front ? 1 : 0,
                            h.hit ? 1 : 0, util::fmt17(h.distance_m));
  }

  const auto stats = fixation_stats(ds);
  std::string stats_csv = "metric,value\n";
  stats_csv += fmt::format("fixation_count,{}\n", stats.fixation_count);
  stats_csv += fmt::format("fixation_total_ms,{}\n", util::fmt17(stats.fixation_total_ms));
  stats_csv += fmt::format("fixation_mean_ms,{}\n", util::fmt17(stats.fixation_mean_ms));
  stats_csv += fmt::format("fixation_median_ms,{}\n", util::fmt17(stats.fixation_median_ms));
  stats_csv += fmt::format("saccade_count,{}\n", stats.saccade_count);
  for (const auto& o : objects) {
    stats_csv += fmt::format("dwell_ms_body_{},{}\n", o.body_id, util::fmt17(hits.dwell_ms.at(o.body_id)));
  }

  std::map<std::string, std::string> sums;
  const auto put = [&](const char* name, const std::string& content) {
    util::write_file(out_dir / name, content);
    sums[name] = util::sha256_bytes(content);
  };
  put("frusta.obj", obj);
  put("frusta.mtl", mtl);
  put("hits.csv", hits_csv);
  put("stats.csv", stats_csv);
  return sums;
}

}  // namespace pesao::eval
