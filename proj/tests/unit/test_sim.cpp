#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pesao/sim/scenario.hpp"
#include "pesao/sim/simulators.hpp"
#include "pesao/util/io.hpp"
#include "pesao/util/toml_lite.hpp"
#include "support.hpp"

using namespace pesao;
using namespace pesao::sim;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

nlohmann::json demo_json() { return toml::parse_file(std::filesystem::path(PESAO_SOURCE_DIR) / "scenarios/demo.toml"); }

std::string scenario_error(const nlohmann::json& j) {
  try {
    scenario_from_json(j);
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return {};
}

// Glasses direction to world direction written out with explicit frames:
// glasses -> body through the calibration, body -> world through the head.
Vec3 glasses_to_world(const Scenario& s, const Pose& head, const Vec3& d) {
  return quat_rotate(head.orientation, quat_rotate(s.calibration.rotation, d));
}

}  // namespace

TEST(Scenario, DemoLoads) {
  const auto s = load_scenario(std::filesystem::path(PESAO_SOURCE_DIR) / "scenarios/demo.toml");
  EXPECT_EQ(s.duration_s, 20.0);
  EXPECT_EQ(s.mocap_hz, 120.0);
  EXPECT_EQ(s.gaze_clock.offset_s, 37.5);
  EXPECT_EQ(s.objects.size(), 2u);
}

TEST(Scenario, MocapRateCap) {
  auto j = demo_json();
  j["rates"]["mocap_hz"] = 120.0;
  EXPECT_EQ(scenario_error(j), "");
  j["rates"]["mocap_hz"] = 120.5;
  const auto err = scenario_error(j);
  EXPECT_NE(err.find("120 Hz"), std::string::npos) << err;
  EXPECT_NE(err.find("cap"), std::string::npos) << err;
  j["rates"]["mocap_hz"] = 240;
  EXPECT_NE(scenario_error(j).find("120 Hz cap"), std::string::npos);
}

TEST(Scenario, GazeRateMustBe50Or100) {
  auto j = demo_json();
  for (double ok : {50.0, 100.0}) {
    j["rates"]["gaze_hz"] = ok;
    EXPECT_EQ(scenario_error(j), "") << ok;
  }
  for (double bad : {60.0, 99.0, 120.0, 200.0}) {
    j["rates"]["gaze_hz"] = bad;
    const auto err = scenario_error(j);
    EXPECT_NE(err.find("50 or 100 Hz"), std::string::npos) << err;
  }
}

TEST(Scenario, VolumeAndBodyLimits) {
  auto j = demo_json();
  j["head_waypoints"][0]["position_m"] = {2.5, 0.0, 1.0};
  EXPECT_NE(scenario_error(j).find("volume"), std::string::npos);

  j = demo_json();
  j["objects"] = nlohmann::json::array();
  for (int id = 2; id <= 11; ++id) {
    j["objects"].push_back({{"body_id", id}, {"center_m", {0.0, 0.0, 1.0}}});
  }
  EXPECT_NE(scenario_error(j).find("at most 10 tracked bodies"), std::string::npos);
  j["objects"].erase(j["objects"].size() - 1);
  EXPECT_EQ(scenario_error(j), "");
}

TEST(Scenario, ScriptValidation) {
  auto j = demo_json();
  j["gaze_script"][2]["object_id"] = 9;
  EXPECT_NE(scenario_error(j).find("unknown object 9"), std::string::npos);
  j = demo_json();
  j["gaze_script"][0]["t_end_s"] = 4.5;
  EXPECT_NE(scenario_error(j).find("overlaps"), std::string::npos);
  j = demo_json();
  j["gaze_script"][0] = {{"t_start_s", 0.0}, {"t_end_s", 4.0}, {"blink", true}};
  EXPECT_FALSE(scenario_error(j).empty());
  j = demo_json();
  j.erase("head_waypoints");
  EXPECT_NE(scenario_error(j).find("head_waypoints"), std::string::npos);
  EXPECT_THROW(load_scenario("/nonexistent/scenario.toml"), ScenarioError);
}

TEST(Light, ClampsToFixtureRange) {
  EXPECT_EQ(clamp_light({-5.0, 3000.0}), (LightState{0.0, 3200.0}));
  EXPECT_EQ(clamp_light({9000.0, 6500.0}), (LightState{7300.0, 5600.0}));
  EXPECT_EQ(clamp_light({7300.0, 5600.0}), (LightState{7300.0, 5600.0}));
  EXPECT_EQ(clamp_light({0.0, 3200.0}), (LightState{0.0, 3200.0}));
  EXPECT_EQ(clamp_light({1234.5, 4321.0}), (LightState{1234.5, 4321.0}));
  EXPECT_THROW(clamp_light({NAN, 4000.0}), std::invalid_argument);
  EXPECT_THROW(clamp_light({100.0, INFINITY}), std::invalid_argument);
}

TEST(Light, MarkerPayloadCarriesAppliedState) {
  LightState applied;
  const auto m = set_light({20000.0, 1000.0}, DeviceTime{5.0}, &applied);
  EXPECT_EQ(m.kind, MarkerKind::light_change);
  EXPECT_EQ(applied, (LightState{7300.0, 3200.0}));
  const auto j = nlohmann::json::parse(m.payload);
  EXPECT_EQ(j["lux"].get<double>(), 7300.0);
  EXPECT_EQ(j["kelvin"].get<double>(), 3200.0);
}

TEST(Light, SimulatorReplaysClampedSchedule) {
  const auto s = load_scenario(std::filesystem::path(PESAO_SOURCE_DIR) / "scenarios/demo.toml");
  LightSim sim(s);
  ASSERT_EQ(sim.total(), 2u);
  const auto a = sim.next();
  const auto b = sim.next();
  EXPECT_TRUE(sim.done());
  EXPECT_EQ(a.applied, (LightState{800.0, 4000.0}));
  EXPECT_EQ(b.applied, (LightState{7300.0, 5600.0}));
  EXPECT_DOUBLE_EQ(b.event.t.seconds, 11.0 + 1.000005 * 10.0);
  EXPECT_EQ(light_at(s, 9.99), (LightState{800.0, 4000.0}));
  EXPECT_EQ(light_at(s, 15.0), (LightState{7300.0, 5600.0}));
}

TEST(Trials, MatchesReferenceShuffle) {
  // Reference: Fisher-Yates from the back, j uniform in [0, i) by rejection.
  const std::vector<std::string> cond{"dim", "bright", "warm", "cool"};
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 123456789ULL}) {
    std::vector<std::string> expect;
    for (int r = 0; r < 3; ++r) expect.insert(expect.end(), cond.begin(), cond.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = expect.size(); i > 1; --i) {
      const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
      std::uint64_t x;
      do {
        x = rng();
      } while (x >= max - max % i);
      std::swap(expect[i - 1], expect[x % i]);
    }
    const auto plan = generate_trials(seed, cond, 3);
    EXPECT_EQ(plan.order, expect) << seed;
    EXPECT_EQ(trial_plan_from_json(to_json(plan)), plan);
  }
}

TEST(Trials, PermutationAndErrors) {
  const auto plan = generate_trials(7, {"a", "b", "c"}, 4);
  ASSERT_EQ(plan.order.size(), 12u);
  for (const char* c : {"a", "b", "c"}) EXPECT_EQ(std::count(plan.order.begin(), plan.order.end(), c), 4);
  EXPECT_EQ(generate_trials(7, {"a", "b", "c"}, 4), plan);
  EXPECT_NE(generate_trials(8, {"a", "b", "c"}, 4).order, plan.order);
  EXPECT_THROW(generate_trials(1, {}, 1), std::invalid_argument);
  EXPECT_THROW(generate_trials(1, {"a"}, 0), std::invalid_argument);
}

TEST(Mocap, FrameCountTimesAndTruth) {
  auto s = support::basic_scenario(2.0);
  s.mocap_clock = {2.25, -20.0};
  MocapSim sim(s, 1);
  EXPECT_EQ(sim.total(), 240u);
  EXPECT_EQ(sim.channel_count(), 18);
  std::size_t n = 0;
  while (!sim.done()) {
    const auto e = sim.next();
    EXPECT_DOUBLE_EQ(e.t_true, static_cast<double>(n) / 120.0);
    EXPECT_DOUBLE_EQ(e.frame.t.seconds, 2.25 + (1.0 - 20e-6) * e.t_true);
    ASSERT_EQ(e.frame.bodies.size(), 2u);
    EXPECT_EQ(e.frame.bodies[0].body_id, 1);
    EXPECT_EQ(e.frame.bodies[1].body_id, 2);
    EXPECT_EQ(e.frame.bodies[0].pose.position, e.head_truth.position);
    EXPECT_EQ(e.frame.bodies[1].pose.position, (Vec3{1.0, 0.0, 1.0}));
    ++n;
  }
  EXPECT_EQ(n, 240u);
  EXPECT_THROW(sim.next(), std::logic_error);
}

TEST(Mocap, NoiseIsSeededAndBounded) {
  auto s = support::basic_scenario(1.0);
  s.noise.position_m = 0.001;
  MocapSim a(s, 3), b(s, 3);
  double sum2 = 0.0;
  for (int i = 0; i < 120; ++i) {
    const auto ea = a.next();
    const auto eb = b.next();
    EXPECT_EQ(ea.frame.bodies[0].pose.position, eb.frame.bodies[0].pose.position);
    const double d = (ea.frame.bodies[0].pose.position - ea.head_truth.position).norm();
    sum2 += d * d;
  }
  // three axes of 1 mm: rms distance near sqrt(3) mm
  EXPECT_NEAR(std::sqrt(sum2 / 120.0), std::sqrt(3.0) * 1e-3, 0.5e-3);
}

TEST(Gaze, DirectionReconstructsScriptedRay) {
  auto s = support::fusion_scenario(0.0);
  GazeSim sim(s, 1);
  double worst = 0.0;
  while (!sim.done()) {
    const auto e = sim.next();
    const Vec3 w = glasses_to_world(s, e.head_truth, e.sample.dir_g);
    worst = std::max(worst, angle_between(w, e.truth.dir_w));
    if (e.truth.object_id >= 0) {
      const auto* o = find_object(s, e.truth.object_id);
      const Vec3 to = eval_object_pose(*o, e.t_true).position - e.truth.origin_w;
      EXPECT_LT(angle_between(e.truth.dir_w, to), 1e-12);
    }
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Gaze, SceneCameraPoint) {
  auto s = support::basic_scenario(1.0);
  // straight ahead, then a target to the wearer's left and slightly up
  s.gaze_script = {{0.0, 0.5, GazeKind::target, {1.0, 0.0, 1.6}, 0}, {0.5, 1.0, GazeKind::target, {1.0, 0.5, 1.8}, 0}};
  GazeSim sim(s, 1);
  const auto ahead = sim.next();
  EXPECT_NEAR(ahead.sample.gaze2d[0], 0.5, 1e-12);
  EXPECT_NEAR(ahead.sample.gaze2d[1], 0.5, 1e-12);
  GazeEmission left;
  while (!sim.done()) left = sim.next();
  const double yaw = std::atan2(0.5, 2.0);
  const double pitch = std::atan2(0.2, 2.0);
  EXPECT_NEAR(left.sample.gaze2d[0], 0.5 - yaw / (82.0 * kDeg), 1e-9);
  // vertical angle measured in the glasses' y-z plane
  const Vec3 d = left.sample.dir_g;
  EXPECT_NEAR(left.sample.gaze2d[1], 0.5 - std::atan2(d.y, d.z) / (52.0 * kDeg), 1e-12);
  EXPECT_LT(left.sample.gaze2d[1], 0.5);
  EXPECT_GT(pitch, 0.0);
}

TEST(Gaze, BlinksBeaconsAndNativeLog) {
  support::TempDir dir;
  auto s = support::basic_scenario(3.0);
  s.gaze_script = {{0.0, 1.0, GazeKind::target, {1.0, 0.0, 1.6}, 0},
                   {1.0, 1.2, GazeKind::blink, {}, 0},
                   {1.2, 3.0, GazeKind::target, {1.0, 0.3, 1.6}, 0}};
  s.native_clock = {5.0, 10.0};
  GazeSim sim(s, 1, dir / "native.ndjson.gz");
  std::size_t invalid = 0, beacons = 0, n = 0;
  while (!sim.done()) {
    const auto e = sim.next();
    invalid += e.sample.valid ? 0 : 1;
    if (e.beacon) {
      ++beacons;
      EXPECT_EQ(n % 100, 0u);
      EXPECT_EQ(e.beacon->t, e.sample.t);
    }
    EXPECT_EQ(e.native_ts_us, std::llround((5.0 + 1.00001 * e.t_true) * 1e6));
    ++n;
  }
  sim.finish();
  EXPECT_EQ(n, 300u);
  EXPECT_EQ(invalid, 20u);
  EXPECT_EQ(beacons, 3u);

  util::GzLineReader r(dir / "native.ndjson.gz");
  std::size_t gaze = 0, pts = 0, imu = 0;
  while (auto line = r.next()) {
    const auto j = nlohmann::json::parse(*line);
    if (j.contains("gd3")) ++gaze;
    if (j.contains("pts")) ++pts;
    if (j.contains("ac")) ++imu;
  }
  EXPECT_EQ(gaze, 300u);
  EXPECT_EQ(pts, 3u);
  EXPECT_EQ(imu, 300u);
}

TEST(Gaze, ImuSeesGravityAndYawRate) {
  auto s = support::basic_scenario(2.0);
  GazeSim still(s, 1);
  for (int i = 0; i < 200; ++i) {
    const auto e = still.next();
    EXPECT_NEAR(e.imu.accel.norm(), 9.80665, 1e-9);
    // gravity points along the glasses' +y (up) for a level head
    EXPECT_NEAR(e.imu.accel.y, 9.80665, 1e-9);
    EXPECT_NEAR(e.imu.gyro.norm(), 0.0, 1e-12);
  }
  // constant 45 deg/s yaw
  s.head_waypoints.push_back({2.0, {{-1.0, 0.0, 1.6}, support::level_head(90.0), 2.0}});
  GazeSim turning(s, 1);
  for (int i = 0; i < 200; ++i) {
    const auto e = turning.next();
    EXPECT_NEAR(e.imu.gyro.norm(), 45.0 * kDeg, 1e-6);
    EXPECT_NEAR(e.imu.gyro.y, 45.0 * kDeg, 1e-6);  // yaw about the glasses' up axis
  }
}

TEST(GroundTruth, WriteReadRoundTrip) {
  support::TempDir dir;
  auto s = support::basic_scenario(1.0);
  {
    GroundTruthWriter w(dir / "gt.tsv", s);
    MocapSim m(s, 1);
    GazeSim g(s, 1);
    while (!m.done()) w.add(m.next());
    while (!g.done()) w.add(g.next());
    w.close();
  }
  const auto rows = read_ground_truth(dir / "gt.tsv");
  ASSERT_EQ(rows.size(), 220u);
  std::size_t mocap = 0;
  for (const auto& r : rows) mocap += r.source == "mocap" ? 1 : 0;
  EXPECT_EQ(mocap, 120u);
  GazeSim g(s, 1);
  const auto first = g.next();
  const auto it = std::find_if(rows.begin(), rows.end(), [](const auto& r) { return r.source == "gaze"; });
  ASSERT_NE(it, rows.end());
  EXPECT_EQ(it->native_ts_us, first.native_ts_us);
  EXPECT_EQ(it->ray, first.truth.dir_w);
  EXPECT_EQ(it->light, (LightState{500.0, 4000.0}));
}

TEST(Script, SaccadeInterpolatesBetweenTargets) {
  auto s = support::basic_scenario(2.0);
  s.gaze_script = {{0.0, 1.0, GazeKind::target, {1.0, -1.0, 1.6}, 0},
                   {1.0, 1.1, GazeKind::saccade, {}, 0},
                   {1.1, 2.0, GazeKind::target, {1.0, 1.0, 1.6}, 0}};
  const Vec3 eye = eval_gaze(s, 0.0).origin_w;
  const Vec3 a = (Vec3{1.0, -1.0, 1.6} - eye).normalized();
  const Vec3 b = (Vec3{1.0, 1.0, 1.6} - eye).normalized();
  const Vec3 mid = eval_gaze(s, 1.05).dir_w;
  EXPECT_NEAR(angle_between(mid, a), angle_between(a, b) / 2.0, 1e-9);
  EXPECT_NEAR(angle_between(mid, b), angle_between(a, b) / 2.0, 1e-9);
  EXPECT_LT(angle_between(eval_gaze(s, 1.0).dir_w, a), 1e-12);
  EXPECT_EQ(sample_count(60.0, 120.0), 7200u);
  EXPECT_EQ(sample_count(60.0, 100.0), 6000u);
}
