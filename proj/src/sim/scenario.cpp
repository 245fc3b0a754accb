#include "pesao/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "pesao/util/toml_lite.hpp"

namespace pesao::sim {
namespace {

using nlohmann::json;

double number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ScenarioError(fmt::format("field {} must be a number", key));
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ScenarioError(fmt::format("field {} must be finite", key));
  return x;
}

double required_number(const json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw ScenarioError(fmt::format("missing field {} in {}", key, where));
  return number(j, key, 0.0);
}

Vec3 vec3(const json& v, const char* key) {
  if (!v.is_array() || v.size() != 3) {
    throw ScenarioError(fmt::format("field {} must be an array of 3 numbers", key));
  }
  Vec3 out{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) throw ScenarioError(fmt::format("field {} must hold numbers", key));
  }
  out = {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
  if (!out.finite()) throw ScenarioError(fmt::format("field {} must be finite", key));
  return out;
}

Quaternion quat_wxyz(const json& v, const char* key) {
  if (!v.is_array() || v.size() != 4) {
    throw ScenarioError(fmt::format("field {} must be an array [w, x, y, z]", key));
  }
  for (std::size_t i = 0; i < 4; ++i) {
    if (!v[i].is_number()) throw ScenarioError(fmt::format("field {} must hold numbers", key));
  }
  const Quaternion q{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                     v[3].get<double>()};
  if (!q.finite() || q.norm() < 1e-6) {
    throw ScenarioError(fmt::format("field {} is not a usable rotation", key));
  }
  return q.normalized();
}

SimClock clock_from(const json& clocks, const char* name) {
  SimClock c;
  if (!clocks.contains(name)) return c;
  const auto& j = clocks.at(name);
  c.offset_s = number(j, "offset_s", 0.0);
  c.drift_ppm = number(j, "drift_ppm", 0.0);
  if (c.offset_s < 0.0) throw ScenarioError(fmt::format("clocks.{}.offset_s must be >= 0", name));
  if (std::abs(c.drift_ppm) >= 1e4) {
    throw ScenarioError(fmt::format("clocks.{}.drift_ppm out of range", name));
  }
  return c;
}

std::vector<Waypoint> waypoints_from(const json& arr, const char* where) {
  std::vector<Waypoint> out;
  for (const auto& w : arr) {
    Waypoint wp;
    wp.t = required_number(w, "t_s", where);
    if (!w.contains("position_m")) throw ScenarioError(fmt::format("missing field position_m in {}", where));
    wp.pose.position = vec3(w.at("position_m"), "position_m");
    wp.pose.orientation = w.contains("orientation_wxyz")
                              ? quat_wxyz(w.at("orientation_wxyz"), "orientation_wxyz")
                              : Quaternion::identity();
    wp.pose.t = wp.t;
    out.push_back(wp);
  }
  return out;
}

bool inside_volume(const Vec3& p) {
  return std::abs(p.x) <= kVolumeHalfExtentXY && std::abs(p.y) <= kVolumeHalfExtentXY &&
         p.z >= 0.0 && p.z <= kVolumeHeight;
}

Pose eval_track(const std::vector<Waypoint>& wps, double t) {
  if (t <= wps.front().t) {
    Pose p = wps.front().pose;
    p.t = t;
    return p;
  }
  if (t >= wps.back().t) {
    Pose p = wps.back().pose;
    p.t = t;
    return p;
  }
  const auto hi = std::upper_bound(wps.begin(), wps.end(), t,
                                   [](double v, const Waypoint& w) { return v < w.t; });
  const auto lo = hi - 1;
  if (lo->t == t) {
    Pose p = lo->pose;
    p.t = t;
    return p;
  }
  Pose a = lo->pose;
  Pose b = hi->pose;
  a.t = lo->t;
  b.t = hi->t;
  return pose_interpolate(a, b, t);
}

Vec3 slerp_dir(const Vec3& a, const Vec3& b, double u) {
  const double theta = angle_between(a, b);
  if (theta < 1e-12) return a;
  const double s = std::sin(theta);
  return (a * (std::sin((1.0 - u) * theta) / s) + b * (std::sin(u * theta) / s)).normalized();
}

}  // namespace

std::size_t sample_count(double duration_s, double rate_hz) {
  return static_cast<std::size_t>(std::llround(duration_s * rate_hz));
}

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw ScenarioError("scenario must be a table");
  Scenario s;
  s.duration_s = number(j, "duration_s", s.duration_s);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<std::int64_t>() < 0) {
      throw ScenarioError("field seed must be a non-negative integer");
    }
    s.seed = j.at("seed").get<std::uint64_t>();
  }

  if (j.contains("rates")) {
    const auto& r = j.at("rates");
    s.mocap_hz = number(r, "mocap_hz", s.mocap_hz);
    s.gaze_hz = number(r, "gaze_hz", s.gaze_hz);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    s.noise.gaze_angular_deg = number(n, "gaze_angular_deg", 0.0);
    s.noise.position_m = number(n, "position_m", 0.0);
    s.noise.quat_angle_deg = number(n, "quat_angle_deg", 0.0);
  }
  if (j.contains("gaze")) s.gaze_invalid_prob = number(j.at("gaze"), "invalid_prob", 0.0);
  if (j.contains("clocks")) {
    const auto& c = j.at("clocks");
    s.gaze_clock = clock_from(c, "gaze");
    s.mocap_clock = clock_from(c, "mocap");
    s.light_clock = clock_from(c, "light");
    s.native_clock = clock_from(c, "native");
  }
  if (j.contains("link")) {
    const auto& l = j.at("link");
    s.link.delay_s = number(l, "delay_s", 0.0);
    s.link.jitter_s = number(l, "jitter_s", 0.0);
    s.link.loss_prob = number(l, "loss_prob", 0.0);
  }
  if (j.contains("calibration")) {
    const auto& c = j.at("calibration");
    if (c.contains("rotation_wxyz")) s.calibration.rotation = quat_wxyz(c.at("rotation_wxyz"), "rotation_wxyz");
    if (c.contains("translation_m")) s.calibration.translation = vec3(c.at("translation_m"), "translation_m");
  }

  if (!j.contains("head_waypoints")) throw ScenarioError("missing field head_waypoints");
  s.head_waypoints = waypoints_from(j.at("head_waypoints"), "head_waypoints");

  if (!j.contains("gaze_script")) throw ScenarioError("missing field gaze_script");
  for (const auto& g : j.at("gaze_script")) {
    GazeSegment seg;
    seg.t_start = required_number(g, "t_start_s", "gaze_script");
    seg.t_end = required_number(g, "t_end_s", "gaze_script");
    const int kinds = static_cast<int>(g.contains("target_m")) + static_cast<int>(g.contains("object_id")) +
                      static_cast<int>(g.value("saccade_to_next", false)) +
                      static_cast<int>(g.value("blink", false));
    if (kinds != 1) {
      throw ScenarioError(
          "gaze_script entry needs exactly one of target_m, object_id, saccade_to_next, blink");
    }
    if (g.contains("target_m")) {
      seg.kind = GazeKind::target;
      seg.target = vec3(g.at("target_m"), "target_m");
    } else if (g.contains("object_id")) {
      seg.kind = GazeKind::object;
      seg.object_id = g.at("object_id").get<int>();
    } else if (g.value("saccade_to_next", false)) {
      seg.kind = GazeKind::saccade;
    } else {
      seg.kind = GazeKind::blink;
    }
    s.gaze_script.push_back(seg);
  }

  if (j.contains("objects")) {
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      obj.body_id = static_cast<int>(required_number(o, "body_id", "objects"));
      if (!o.contains("center_m")) throw ScenarioError("missing field center_m in objects");
      obj.center = vec3(o.at("center_m"), "center_m");
      obj.radius_m = number(o, "radius_m", obj.radius_m);
      if (o.contains("waypoints")) obj.waypoints = waypoints_from(o.at("waypoints"), "objects.waypoints");
      s.objects.push_back(obj);
    }
  }
  if (j.contains("light_schedule")) {
    for (const auto& l : j.at("light_schedule")) {
      LightCue cue;
      cue.t = required_number(l, "t_s", "light_schedule");
      cue.lux = required_number(l, "lux", "light_schedule");
      cue.kelvin = required_number(l, "kelvin", "light_schedule");
      s.light_schedule.push_back(cue);
    }
  }

  validate_scenario(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ScenarioError("scenario file not found: " + path.string());
  try {
    return scenario_from_json(toml::parse_file(path));
  } catch (const toml::ParseError& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
}

void validate_scenario(const Scenario& s) {
  if (!(s.duration_s > 0.0)) throw ScenarioError("duration_s must be positive");
  if (!(s.mocap_hz > 0.0)) throw ScenarioError("mocap rate must be positive");
  if (s.mocap_hz > kMaxMocapRateHz) {
    throw ScenarioError(fmt::format("mocap rate exceeds 120 Hz cap (got {} Hz)", s.mocap_hz));
  }
  if (s.gaze_hz != 50.0 && s.gaze_hz != 100.0) {
    throw ScenarioError(fmt::format("gaze rate must be 50 or 100 Hz (got {} Hz)", s.gaze_hz));
  }
  if (s.noise.gaze_angular_deg < 0 || s.noise.position_m < 0 || s.noise.quat_angle_deg < 0) {
    throw ScenarioError("noise parameters must be non-negative");
  }
  if (s.gaze_invalid_prob < 0.0 || s.gaze_invalid_prob >= 1.0) {
    throw ScenarioError("gaze.invalid_prob must be in [0, 1)");
  }
  if (s.link.delay_s < 0 || s.link.jitter_s < 0 || s.link.jitter_s > s.link.delay_s) {
    throw ScenarioError("link needs delay_s >= jitter_s >= 0");
  }
  if (s.link.loss_prob < 0.0 || s.link.loss_prob >= 1.0) {
    throw ScenarioError("link.loss_prob must be in [0, 1)");
  }

  if (s.head_waypoints.empty()) throw ScenarioError("head_waypoints must not be empty");
  for (std::size_t i = 0; i < s.head_waypoints.size(); ++i) {
    const auto& w = s.head_waypoints[i];
    if (i > 0 && !(w.t > s.head_waypoints[i - 1].t)) {
      throw ScenarioError(fmt::format("head waypoint times are not strictly increasing ({} after {})",
                                      w.t, s.head_waypoints[i - 1].t));
    }
    if (!inside_volume(w.pose.position)) {
      throw ScenarioError(fmt::format("head waypoint at t={} lies outside the 4 m x 4 m x 2 m volume", w.t));
    }
  }

  if (s.objects.size() + 1 > 10) {
    throw ScenarioError(fmt::format("at most 10 tracked bodies (head + 9 objects), got {}",
                                    s.objects.size() + 1));
  }
  std::set<int> ids;
  for (const auto& o : s.objects) {
    if (o.body_id < 2) throw ScenarioError("object body_id must be >= 2 (1 is the head)");
    if (!ids.insert(o.body_id).second) throw ScenarioError(fmt::format("duplicate object body_id {}", o.body_id));
    if (!(o.radius_m > 0.0)) throw ScenarioError(fmt::format("object {} radius must be positive", o.body_id));
    if (!inside_volume(o.center)) {
      throw ScenarioError(fmt::format("object {} lies outside the tracking volume", o.body_id));
    }
    for (std::size_t i = 0; i < o.waypoints.size(); ++i) {
      if (i > 0 && !(o.waypoints[i].t > o.waypoints[i - 1].t)) {
        throw ScenarioError(fmt::format("object {} waypoint times are not strictly increasing", o.body_id));
      }
      if (!inside_volume(o.waypoints[i].pose.position)) {
        throw ScenarioError(fmt::format("object {} waypoint lies outside the tracking volume", o.body_id));
      }
    }
  }

  if (s.gaze_script.empty()) throw ScenarioError("gaze_script must not be empty");
  const auto is_fix = [](GazeKind k) { return k == GazeKind::target || k == GazeKind::object; };
  for (std::size_t i = 0; i < s.gaze_script.size(); ++i) {
    const auto& g = s.gaze_script[i];
    if (!(g.t_end > g.t_start)) throw ScenarioError(fmt::format("gaze segment {} has t_end <= t_start", i));
    if (i > 0 && g.t_start < s.gaze_script[i - 1].t_end) {
      throw ScenarioError(fmt::format("gaze segment {} overlaps its predecessor", i));
    }
    if (g.kind == GazeKind::object && find_object(s, g.object_id) == nullptr) {
      throw ScenarioError(fmt::format("gaze segment {} references unknown object {}", i, g.object_id));
    }
    if (g.kind == GazeKind::saccade || g.kind == GazeKind::blink) {
      if (i == 0 || !is_fix(s.gaze_script[i - 1].kind)) {
        throw ScenarioError(fmt::format("gaze segment {} must follow a target or object segment", i));
      }
    }
    if (g.kind == GazeKind::saccade &&
        (i + 1 >= s.gaze_script.size() || !is_fix(s.gaze_script[i + 1].kind))) {
      throw ScenarioError(fmt::format("saccade segment {} needs a target or object segment after it", i));
    }
  }
  if (!is_fix(s.gaze_script.front().kind)) throw ScenarioError("gaze_script must start with a target");

  for (std::size_t i = 0; i < s.light_schedule.size(); ++i) {
    if (i > 0 && s.light_schedule[i].t < s.light_schedule[i - 1].t) {
      throw ScenarioError("light_schedule times must be non-decreasing");
    }
  }
}

Pose eval_head_pose(const Scenario& s, double t) { return eval_track(s.head_waypoints, t); }

Pose eval_object_pose(const SceneObject& o, double t) {
  if (o.waypoints.empty()) {
    Pose p;
    p.position = o.center;
    p.t = t;
    return p;
  }
  return eval_track(o.waypoints, t);
}

const SceneObject* find_object(const Scenario& s, int body_id) {
  for (const auto& o : s.objects) {
    if (o.body_id == body_id) return &o;
  }
  return nullptr;
}

Vec3 eye_origin_world(const Scenario& s, const Pose& head) {
  return head.position + quat_rotate(head.orientation, s.calibration.translation);
}

namespace {

Vec3 segment_point(const Scenario& s, const GazeSegment& g, double t) {
  if (g.kind == GazeKind::object) return eval_object_pose(*find_object(s, g.object_id), t).position;
  return g.target;
}

Vec3 dir_to(const Scenario& s, const GazeSegment& g, double t) {
  const Vec3 eye = eye_origin_world(s, eval_head_pose(s, t));
  return (segment_point(s, g, t) - eye).normalized();
}

}  // namespace

GazeTruth eval_gaze(const Scenario& s, double t) {
  const Pose head = eval_head_pose(s, t);
  GazeTruth out;
  out.origin_w = eye_origin_world(s, head);

  const auto& script = s.gaze_script;
  // last segment starting at or before t; the first one when t precedes all
  std::size_t i = 0;
  while (i + 1 < script.size() && script[i + 1].t_start <= t) ++i;
  const GazeSegment* seg = &script[i];
  if (t >= seg->t_end && seg->kind == GazeKind::saccade) {
    seg = &script[i + 1];  // saccade finished but next segment not started: hold its target
  }

  switch (seg->kind) {
    case GazeKind::target:
    case GazeKind::object:
      out.dir_w = (segment_point(s, *seg, t) - out.origin_w).normalized();
      if (seg->kind == GazeKind::object) out.object_id = seg->object_id;
      break;
    case GazeKind::blink: {
      const GazeSegment& prev = script[i - 1];
      out.dir_w = (segment_point(s, prev, t) - out.origin_w).normalized();
      out.blink = t < seg->t_end;
      break;
    }
    case GazeKind::saccade: {
      const GazeSegment& prev = script[i - 1];
      const GazeSegment& next = script[i + 1];
      const double u = (t - seg->t_start) / (seg->t_end - seg->t_start);
      out.dir_w = slerp_dir(dir_to(s, prev, seg->t_start), dir_to(s, next, seg->t_end), u);
      break;
    }
  }
  return out;
}

Vec3 world_to_glasses_dir(const Scenario& s, const Pose& head, const Vec3& dir_w) {
  const Vec3 body = quat_rotate(head.orientation.conjugate(), dir_w);
  return quat_rotate(s.calibration.rotation.conjugate(), body).normalized();
}

}  // namespace pesao::sim
