#include "pesao/sim/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace pesao::sim {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kGravity = 9.80665;
constexpr double kSceneHfovDeg = 82.0;
constexpr double kSceneVfovDeg = 52.0;
constexpr double kImuStep = 1e-3;

// Distinct streams per simulator so adding noise to one leaves the other
// reproducible.
constexpr std::uint64_t kMocapSalt = 0x6d6f636170ULL;
constexpr std::uint64_t kGazeSalt = 0x67617a65ULL;

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - max % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

Quaternion small_rotation(std::mt19937_64& rng, double sigma_rad) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vec3 axis{n01(rng), n01(rng), n01(rng)};
  if (axis.norm() < 1e-12) axis = {0.0, 0.0, 1.0};
  return Quaternion::from_axis_angle(axis, sigma_rad * n01(rng));
}

Vec3 perturb_direction(std::mt19937_64& rng, const Vec3& dir, double sigma_rad) {
  std::normal_distribution<double> n(0.0, sigma_rad);
  const Vec3 helper = std::abs(dir.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const Vec3 e1 = dir.cross(helper).normalized();
  const Vec3 e2 = dir.cross(e1);
  const double a = n(rng);
  const double b = n(rng);
  const double theta = std::hypot(a, b);
  if (theta < 1e-15) return dir;
  const Vec3 tangent = (e1 * a + e2 * b) / theta;
  return (dir * std::cos(theta) + tangent * std::sin(theta)).normalized();
}

// Normalized scene-camera point, (0, 0) top left. Glasses frame is right
// handed with y up and z forward, so +x points to the wearer's left.
std::array<double, 2> scene_point(const Vec3& dir_g) {
  const double u = 0.5 - std::atan2(dir_g.x, dir_g.z) / (kSceneHfovDeg * kDegToRad);
  const double v = 0.5 - std::atan2(dir_g.y, dir_g.z) / (kSceneVfovDeg * kDegToRad);
  return {std::clamp(u, 0.0, 1.0), std::clamp(v, 0.0, 1.0)};
}

ImuRecord synth_imu(const Scenario& s, double t) {
  // keep the stencil symmetric and inside the session near its ends
  const double c = s.duration_s > 2.0 * kImuStep ? std::clamp(t, kImuStep, s.duration_s - kImuStep) : t;
  const double lo = std::max(0.0, c - kImuStep);
  const double hi = std::min(s.duration_s, c + kImuStep);
  const Pose p0 = eval_head_pose(s, lo);
  const Pose p1 = eval_head_pose(s, c);
  const Pose p2 = eval_head_pose(s, hi);
  const Quaternion to_glasses = (eval_head_pose(s, t).orientation * s.calibration.rotation).conjugate();

  ImuRecord r;
  Vec3 accel{0.0, 0.0, kGravity};
  if (hi - lo > 0.0) {
    const double h = (hi - lo) / 2.0;
    accel += (p2.position - p1.position * 2.0 + p0.position) / (h * h);
    // body-frame angular velocity from the relative rotation across the step
    Quaternion dq = p0.orientation.conjugate() * p2.orientation;
    if (dq.w < 0.0) dq = -dq;
    const Vec3 v{dq.x, dq.y, dq.z};
    const double sin_half = v.norm();
    if (sin_half > 1e-15) {
      const double angle = 2.0 * std::atan2(sin_half, dq.w);
      r.gyro = quat_rotate(s.calibration.rotation.conjugate(), v / sin_half * (angle / (hi - lo)));
    }
  }
  r.accel = quat_rotate(to_glasses, accel);
  return r;
}

nlohmann::ordered_json arr(const Vec3& v) { return {v.x, v.y, v.z}; }

}  // namespace

LightState clamp_light(const LightState& requested) {
  if (!std::isfinite(requested.intensity_lux) || !std::isfinite(requested.colour_temp_k)) {
    throw std::invalid_argument("light request must be finite");
  }
  return {std::clamp(requested.intensity_lux, 0.0, kMaxLightLux),
          std::clamp(requested.colour_temp_k, kMinColourTempK, kMaxColourTempK)};
}

MarkerEvent set_light(const LightState& requested, DeviceTime t, LightState* applied) {
  const LightState a = clamp_light(requested);
  if (applied != nullptr) *applied = a;
  nlohmann::ordered_json payload{{"lux", a.intensity_lux}, {"kelvin", a.colour_temp_k}};
  return MarkerEvent{t, MarkerKind::light_change, payload.dump()};
}

LightState light_at(const Scenario& s, double t) {
  LightState state;
  for (const auto& cue : s.light_schedule) {
    if (cue.t > t) break;
    state = clamp_light({cue.lux, cue.kelvin});
  }
  return state;
}

TrialPlan generate_trials(std::uint64_t seed, const std::vector<std::string>& conditions,
                          int repetitions) {
  if (conditions.empty()) throw std::invalid_argument("conditions must not be empty");
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  TrialPlan plan{seed, conditions, repetitions, {}};
  for (int r = 0; r < repetitions; ++r) {
    plan.order.insert(plan.order.end(), conditions.begin(), conditions.end());
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = plan.order.size(); i > 1; --i) {
    const std::size_t j = uniform_below(rng, i);
    std::swap(plan.order[i - 1], plan.order[j]);
  }
  return plan;
}

nlohmann::json to_json(const TrialPlan& p) {
  return {{"seed", p.seed},
          {"conditions", p.conditions},
          {"repetitions", p.repetitions},
          {"order", p.order}};
}

TrialPlan trial_plan_from_json(const nlohmann::json& j) {
  TrialPlan p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.conditions = j.at("conditions").get<std::vector<std::string>>();
  p.repetitions = j.at("repetitions").get<int>();
  p.order = j.at("order").get<std::vector<std::string>>();
  return p;
}

// ---- mocap

MocapSim::MocapSim(const Scenario& s, std::uint64_t seed)
    : s_(s), rng_(seed ^ kMocapSalt), total_(sample_count(s.duration_s, s.mocap_hz)) {}

int MocapSim::channel_count() const {
  return static_cast<int>((1 + s_.objects.size()) * kChannelsPerBody);
}

StreamInfo MocapSim::stream_info(const std::string& uid) const {
  return {uid, kMocapStreamName, StreamType::mocap, s_.mocap_hz, channel_count(), "", 0};
}

RigidBodyState MocapSim::noisy(int id, const Pose& truth, double device_t) {
  RigidBodyState b;
  b.body_id = id;
  b.pose = truth;
  b.pose.t = device_t;
  b.pose.domain = TimeDomain::device;
  b.mean_marker_error = 0.0002 + s_.noise.position_m;
  if (s_.noise.position_m > 0.0) {
    std::normal_distribution<double> n(0.0, s_.noise.position_m);
    b.pose.position += Vec3{n(rng_), n(rng_), n(rng_)};
  }
  if (s_.noise.quat_angle_deg > 0.0) {
    b.pose.orientation =
        (small_rotation(rng_, s_.noise.quat_angle_deg * kDegToRad) * b.pose.orientation).normalized();
  }
  return b;
}

MocapEmission MocapSim::next() {
  if (done()) throw std::logic_error("mocap simulator exhausted");
  MocapEmission e;
  e.t_true = next_time();
  const double device_t = s_.mocap_clock.device(e.t_true);
  e.frame.t = DeviceTime{device_t};
  e.head_truth = eval_head_pose(s_, e.t_true);
  e.frame.bodies.push_back(noisy(1, e.head_truth, device_t));
  for (const auto& o : s_.objects) {
    e.frame.bodies.push_back(noisy(o.body_id, eval_object_pose(o, e.t_true), device_t));
  }
  ++k_;
  return e;
}

// ---- gaze

GazeSim::GazeSim(const Scenario& s, std::uint64_t seed,
                 const std::optional<std::filesystem::path>& native_log)
    : s_(s), rng_(seed ^ kGazeSalt), total_(sample_count(s.duration_s, s.gaze_hz)) {
  if (native_log) log_ = std::make_unique<util::GzLineWriter>(*native_log);
}

StreamInfo GazeSim::stream_info(const std::string& uid) const {
  return {uid, kGazeStreamName, StreamType::gaze, s_.gaze_hz,
          static_cast<int>(GazeSample::kChannels), "", 0};
}

GazeEmission GazeSim::next() {
  if (done()) throw std::logic_error("gaze simulator exhausted");
  GazeEmission e;
  e.t_true = next_time();
  e.head_truth = eval_head_pose(s_, e.t_true);
  e.truth = eval_gaze(s_, e.t_true);

  GazeSample& g = e.sample;
  g.t = DeviceTime{s_.gaze_clock.device(e.t_true)};
  g.origin_g = {0.0, 0.0, 0.0};
  g.dir_g = world_to_glasses_dir(s_, e.head_truth, e.truth.dir_w);
  if (s_.noise.gaze_angular_deg > 0.0) {
    g.dir_g = perturb_direction(rng_, g.dir_g, s_.noise.gaze_angular_deg * kDegToRad);
  }
  g.gaze2d = scene_point(g.dir_g);
  g.valid = !e.truth.blink;
  if (s_.gaze_invalid_prob > 0.0) {
    std::bernoulli_distribution lost(s_.gaze_invalid_prob);
    if (lost(rng_)) g.valid = false;
  }
  e.native_ts_us = std::llround(s_.native_clock.device(e.t_true) * 1e6);
  e.imu = synth_imu(s_, e.t_true);

  const auto per_second = static_cast<std::size_t>(std::llround(s_.gaze_hz));
  if (k_ % per_second == 0) {
    e.beacon = wire::PtsBeacon{g.t, std::llround(e.t_true * 1e6)};
  }

  if (log_) {
    if (e.beacon) {
      log_->write_line(nlohmann::ordered_json{{"ts", e.native_ts_us}, {"pts", e.beacon->pts}}.dump());
    }
    log_->write_line(nlohmann::ordered_json{{"ts", e.native_ts_us},
                                            {"gd3", arr(g.dir_g)},
                                            {"gp", {g.gaze2d[0], g.gaze2d[1]}},
                                            {"s", g.valid ? 0 : 1}}
                         .dump());
    log_->write_line(nlohmann::ordered_json{
        {"ts", e.native_ts_us}, {"ac", arr(e.imu.accel)}, {"gy", arr(e.imu.gyro)}}
                         .dump());
  }
  ++k_;
  return e;
}

void GazeSim::finish() {
  if (log_) log_->close();
}

// ---- light

LightSim::LightSim(const Scenario& s) : s_(s) {}

StreamInfo LightSim::stream_info(const std::string& uid) const {
  return {uid, kLightStreamName, StreamType::light, 0.0, 2, "", 0};
}

LightEmission LightSim::next() {
  if (done()) throw std::logic_error("light simulator exhausted");
  const auto& cue = s_.light_schedule[k_++];
  LightEmission e;
  e.t_true = cue.t;
  e.event = set_light({cue.lux, cue.kelvin}, DeviceTime{s_.light_clock.device(cue.t)}, &e.applied);
  return e;
}

// ---- ground truth

const std::vector<std::string>& GroundTruthWriter::columns() {
  static const std::vector<std::string> cols{
      "t_true_s", "source",  "device_ts_s", "native_ts_us", "head_px", "head_py", "head_pz",
      "head_qw",  "head_qx", "head_qy",     "head_qz",      "eye_ox",  "eye_oy",  "eye_oz",
      "ray_dx",   "ray_dy",  "ray_dz",      "object_id",    "lux",     "kelvin",  "valid"};
  return cols;
}

GroundTruthWriter::GroundTruthWriter(const std::filesystem::path& path, const Scenario& s)
    : out_(path, std::ios::binary | std::ios::trunc), s_(s) {
  if (!out_) throw std::runtime_error("cannot write ground truth to " + path.string());
  const auto& cols = columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out_ << (i ? "\t" : "") << cols[i];
  out_ << '\n';
}

void GroundTruthWriter::row(double t_true, const char* source, double device_ts,
                            std::int64_t native_ts, const Pose& head, const Vec3& eye,
                            const Vec3& ray, int object_id, bool valid) {
  const LightState light = light_at(s_, t_true);
  const auto& p = head.position;
  const auto& q = head.orientation;
  out_ << fmt::format(
      "{:.17g}\t{}\t{:.17g}\t{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t"
      "{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\t{}\t{:.17g}\t{:.17g}\t{}\n",
      t_true, source, device_ts, native_ts, p.x, p.y, p.z, q.w, q.x, q.y, q.z, eye.x, eye.y,
      eye.z, ray.x, ray.y, ray.z, object_id, light.intensity_lux, light.colour_temp_k,
      valid ? 1 : 0);
}

void GroundTruthWriter::add(const MocapEmission& e) {
  const Vec3 eye = eye_origin_world(s_, e.head_truth);
  row(e.t_true, "mocap", e.frame.t.seconds, -1, e.head_truth, eye, {0.0, 0.0, 0.0}, -1, true);
}

void GroundTruthWriter::add(const GazeEmission& e) {
  row(e.t_true, "gaze", e.sample.t.seconds, e.native_ts_us, e.head_truth, e.truth.origin_w,
      e.truth.dir_w, e.truth.object_id, e.sample.valid);
}

void GroundTruthWriter::close() {
  out_.flush();
  out_.close();
}

std::vector<GroundTruthRow> read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read ground truth " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = util::split(line, '\t');
  if (header != GroundTruthWriter::columns()) throw std::runtime_error("unexpected ground truth header");
  std::vector<GroundTruthRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = util::split(line, '\t');
    if (f.size() != header.size()) throw std::runtime_error("short ground truth row");
    const auto d = [&](std::size_t i) { return std::stod(f[i]); };
    GroundTruthRow r;
    r.t_true = d(0);
    r.source = f[1];
    r.device_ts = d(2);
    r.native_ts_us = std::stoll(f[3]);
    r.head.position = {d(4), d(5), d(6)};
    r.head.orientation = {d(7), d(8), d(9), d(10)};
    r.head.t = r.t_true;
    r.eye = {d(11), d(12), d(13)};
    r.ray = {d(14), d(15), d(16)};
    r.object_id = std::stoi(f[17]);
    r.light = {d(18), d(19)};
    r.valid = f[20] == "1";
    rows.push_back(r);
  }
  return rows;
}

}  // namespace pesao::sim
