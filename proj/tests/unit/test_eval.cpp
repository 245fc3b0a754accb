#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "pesao/eval/eval.hpp"
#include "pesao/proc/dataset.hpp"
#include "pesao/recorder/virtual_session.hpp"
#include "pesao/util/io.hpp"
#include "support.hpp"

using namespace pesao;
using namespace pesao::eval;
using proc::Label;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

/// Records at 100 Hz looking along +x from the origin, with object `id` at `center`.
proc::SyncedDataset line_of_sight(std::size_t n, int id, const Vec3& center, Label label = Label::fixation) {
  proc::SyncedDataset ds;
  std::vector<double> t;
  std::vector<Label> labels;
  for (std::size_t i = 0; i < n; ++i) {
    proc::SyncedRecord r;
    r.t_world = 0.01 * static_cast<double>(i);
    r.head = Pose{{0, 0, 0}, support::level_head()};
    r.ray = proc::GazeRay{{0, 0, 0}, {1, 0, 0}};
    r.label = label;
    r.objects.push_back({id, Pose{center, {}}});
    t.push_back(r.t_world);
    labels.push_back(label);
    ds.records.push_back(r);
  }
  ds.segments = proc::segments_from_labels(t, labels);
  return ds;
}

/// Signed distance of p from the plane through a, b, c.
double plane_distance(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& p) {
  const Vec3 n = (b - a).cross(c - a).normalized();
  return n.dot(p - a);
}

proc::SyncedDataset process(const sim::Scenario& s, const support::TempDir& dir) {
  recorder::VirtualSessionOptions o;
  o.container = dir / "s.xdf";
  o.native_log = dir / "n.gz";
  recorder::run_virtual_session(s, o);
  const auto rec = xdf::read_recording(o.container);
  const auto log = proc::load_native_log(*o.native_log);
  proc::ProcessOptions opt;
  opt.calibration = {s.calibration.rotation, s.calibration.translation};
  return proc::build_synced_dataset(rec, log, proc::build_clock_maps(rec, log), opt);
}

}  // namespace

// ---- frusta

TEST(Frustum, NinetyDegreeNearPlane) {
  const auto f = compute_frustum(Pose{}, {90.0, 90.0, 1.0, 2.0}, 0.0);
  const Vec3 want[4] = {{-1, -1, 1}, {1, -1, 1}, {1, 1, 1}, {-1, 1, 1}};
  for (int c = 0; c < 4; ++c) {
    EXPECT_NEAR(f.corners[c].x, want[c].x, 1e-15);
    EXPECT_NEAR(f.corners[c].y, want[c].y, 1e-15);
    EXPECT_EQ(f.corners[c].z, 1.0);
    // far = 2 near: far extents exactly double
    EXPECT_EQ(f.corners[c + 4].x, 2.0 * f.corners[c].x);
    EXPECT_EQ(f.corners[c + 4].y, 2.0 * f.corners[c].y);
  }
}

TEST(Frustum, RotatedPoseAndFacePlanes) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  const FrustumParams p{82.0, 52.0, 0.1, 4.0};
  const auto ident = compute_frustum(Pose{}, p, 0.0);
  for (int k = 0; k < 50; ++k) {
    const Quaternion q = Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
    const Vec3 x{n(rng), n(rng), n(rng)};
    const auto f = compute_frustum(Pose{x, q}, p, 1.0);
    for (std::size_t c = 0; c < 8; ++c) {
      const Vec3 want = quat_rotate(q, ident.corners[c]) + x;
      EXPECT_LE((f.corners[c] - want).norm(), 1e-12);
    }
    // the four side faces and the two caps are planar
    const auto& v = f.corners;
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t a = s, b = (s + 1) % 4;
      EXPECT_LE(std::abs(plane_distance(v[a], v[b], v[b + 4], v[a + 4])), 1e-9);
      // side faces pass through the apex
      EXPECT_LE(std::abs(plane_distance(v[a], v[b], v[b + 4], x)), 1e-9);
    }
    EXPECT_LE(std::abs(plane_distance(v[0], v[1], v[2], v[3])), 1e-9);
    EXPECT_LE(std::abs(plane_distance(v[4], v[5], v[6], v[7])), 1e-9);
  }
}

TEST(Frustum, ParameterChecks) {
  EXPECT_THROW(check_params({0.0, 50.0, 0.1, 1.0}), EvalError);
  EXPECT_THROW(check_params({180.0, 50.0, 0.1, 1.0}), EvalError);
  EXPECT_THROW(check_params({80.0, 50.0, 1.0, 1.0}), EvalError);
  EXPECT_THROW(check_params({80.0, 50.0, 0.0, 1.0}), EvalError);
  EXPECT_NO_THROW(check_params({}));
}

TEST(Color, RampEndsMidpointAndMonotone) {
  EXPECT_EQ(temporal_color(0.0, 0.0, 1.0), (std::array<int, 3>{0, 0, 255}));
  EXPECT_EQ(temporal_color(1.0, 0.0, 1.0), (std::array<int, 3>{255, 0, 0}));
  EXPECT_EQ(temporal_color(0.5, 0.0, 1.0), (std::array<int, 3>{128, 0, 128}));
  EXPECT_EQ(temporal_color(-3.0, 0.0, 1.0), temporal_color(0.0, 0.0, 1.0));
  auto prev = temporal_color(10.0, 10.0, 20.0);
  for (int i = 1; i <= 1000; ++i) {
    const auto c = temporal_color(10.0 + i * 0.01, 10.0, 20.0);
    EXPECT_GE(c[0], prev[0]);
    EXPECT_LE(c[2], prev[2]);
    prev = c;
  }
}

// ---- hits

TEST(Hits, PointLineExamples) {
  auto [d, ahead] = ray_point_distance({0, 0, 0}, {1, 0, 0}, {5, 0.5, 0});
  EXPECT_DOUBLE_EQ(d, 0.5);
  EXPECT_TRUE(ahead);
  std::tie(d, ahead) = ray_point_distance({0, 0, 0}, {1, 0, 0}, {-5, 0, 0});
  EXPECT_FALSE(ahead);

  const auto front = gaze_object_hits(line_of_sight(3, 4, {5, 0.5, 0}), {{4, 1.0, "a"}});
  ASSERT_EQ(front.hits.size(), 3u);
  EXPECT_TRUE(front.hits[0].hit);
  EXPECT_DOUBLE_EQ(front.hits[0].distance_m, 0.5);
  const auto behind = gaze_object_hits(line_of_sight(3, 4, {-5, 0, 0}), {{4, 100.0, "a"}});
  EXPECT_FALSE(behind.hits[0].hit);
  EXPECT_FALSE(behind.hits[0].in_front);
  // inclusive radius
  EXPECT_TRUE(gaze_object_hits(line_of_sight(2, 4, {5, 0.5, 0}), {{4, 0.5, "a"}}).hits[0].hit);
  EXPECT_THROW(gaze_object_hits(line_of_sight(2, 4, {5, 0, 0}), {{9, 0.5, "x"}}), EvalError);
}

TEST(Hits, InvariantUnderRigidTransform) {
  support::TempDir dir;
  auto s = support::fusion_scenario(0.5);
  s.duration_s = 6.0;
  auto ds = process(s, dir);
  const std::vector<ObjectSpec> objs{{2, 0.15, "a"}, {3, 0.15, "b"}, {4, 0.15, "c"}};
  const auto base = gaze_object_hits(ds, objs);
  const Quaternion q = Quaternion::from_axis_angle(Vec3{1, 2, 3}.normalized(), 0.7);
  const Vec3 x{3, -1, 0.5};
  for (auto& r : ds.records) {
    if (r.ray) r.ray = proc::GazeRay{quat_rotate(q, r.ray->origin) + x, quat_rotate(q, r.ray->dir)};
    for (auto& o : r.objects) o.pose.position = quat_rotate(q, o.pose.position) + x;
  }
  const auto moved = gaze_object_hits(ds, objs);
  ASSERT_EQ(base.hits.size(), moved.hits.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < base.hits.size(); ++i) {
    EXPECT_NEAR(base.hits[i].distance_m, moved.hits[i].distance_m, 1e-12);
    if (std::abs(base.hits[i].distance_m - 0.15) > 1e-9) {
      EXPECT_EQ(base.hits[i].hit, moved.hits[i].hit);
    }
    hits += base.hits[i].hit ? 1 : 0;
  }
  EXPECT_GT(hits, 0u);
}

TEST(Hits, DwellMatchesScriptedFixation) {
  support::TempDir dir;
  auto s = support::basic_scenario(30.0);
  const Vec3 target = s.gaze_script.front().target;
  using sim::GazeKind;
  s.gaze_script = {{0.0, 9.95, GazeKind::target, target, 0},
                   {9.95, 10.0, GazeKind::saccade, {}, 0},
                   {10.0, 20.0, GazeKind::object, {}, 2},
                   {20.0, 20.05, GazeKind::saccade, {}, 0},
                   {20.05, 30.0, GazeKind::target, target, 0}};
  const auto ds = process(s, dir);
  const auto res = gaze_object_hits(ds, {{2, 0.15, "box"}});
  EXPECT_NEAR(res.dwell_ms.at(2), 10000.0, 20.0);
  const auto stats = fixation_stats(ds);
  EXPECT_LE(res.dwell_ms.at(2), stats.fixation_total_ms);
}

// ---- stats

TEST(Stats, ArithmeticAndEmpty) {
  std::vector<double> t;
  std::vector<Label> labels;
  const auto add = [&](Label l, int n) {
    for (int i = 0; i < n; ++i) {
      t.push_back(0.01 * static_cast<double>(t.size()));
      labels.push_back(l);
    }
  };
  add(Label::fixation, 10);
  add(Label::saccade, 3);
  add(Label::fixation, 20);
  add(Label::unclassified, 2);
  proc::SyncedDataset ds;
  ds.segments = proc::segments_from_labels(t, labels);
  const auto s = fixation_stats(ds);
  EXPECT_EQ(s.fixation_count, 2u);
  EXPECT_NEAR(s.fixation_total_ms, 300.0, 1e-9);
  EXPECT_NEAR(s.fixation_mean_ms, 150.0, 1e-9);
  EXPECT_NEAR(s.fixation_median_ms, 150.0, 1e-9);
  EXPECT_EQ(s.saccade_count, 1u);

  std::fill(labels.begin(), labels.end(), Label::unclassified);
  ds.segments = proc::segments_from_labels(t, labels);
  const auto z = fixation_stats(ds);
  EXPECT_EQ(z.fixation_count, 0u);
  EXPECT_EQ(z.fixation_total_ms, 0.0);
  EXPECT_EQ(z.saccade_count, 0u);
  EXPECT_EQ(fixation_stats({}).fixation_count, 0u);
}

TEST(Stats, ScriptedSessionCountsTwelve) {
  support::TempDir dir;
  const auto ds = process(support::ivt_scenario(), dir);
  EXPECT_EQ(fixation_stats(ds).fixation_count, 12u);
}

// ---- artifacts

TEST(Artifacts, ObjCountsAndCornersRoundTrip) {
  support::TempDir dir;
  auto ds = line_of_sight(50, 2, {2, 0, 0});
  ds.records[3].head->position = {0.25, -0.5, 1.75};
  ds.records[3].head->orientation = Quaternion::from_axis_angle(Vec3{0.2, 1, 0.3}.normalized(), 0.9);
  const FrustumParams p{82.0, 52.0, 0.1, 4.0};
  const auto sums = export_artifacts(ds, {{2, 0.15, "ball"}}, dir / "a", p, 10);
  EXPECT_EQ(sums, export_artifacts(ds, {{2, 0.15, "ball"}}, dir / "b", p, 10));
  for (const auto& [name, sum] : sums) {
    EXPECT_EQ(util::read_file(dir / "a" / name), util::read_file(dir / "b" / name)) << name;
    EXPECT_EQ(sum, support::sha256sum(dir / "a" / name));
  }

  std::ifstream obj(dir / "a" / "frusta.obj");
  std::vector<Vec3> verts;
  std::vector<std::pair<int, int>> lines;
  std::string line;
  while (std::getline(obj, line)) {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      std::string x, y, z;
      ss >> x >> y >> z;
      verts.push_back({std::stod(x), std::stod(y), std::stod(z)});
    } else if (tag == "l") {
      int a, b;
      ss >> a >> b;
      lines.emplace_back(a, b);
    }
  }
  // stride 10 over 50 records picks 0, 10, 20, 30, 40
  ASSERT_EQ(verts.size(), 40u);
  EXPECT_EQ(lines.size(), 60u);
  for (std::size_t k = 0; k < 5; ++k) {
    const auto& r = ds.records[k * 10];
    const auto f = compute_frustum(*r.head, p, r.t_world);
    for (std::size_t c = 0; c < 8; ++c) {
      const auto& v = verts[8 * k + c];
      EXPECT_EQ(std::bit_cast<std::uint64_t>(v.x), std::bit_cast<std::uint64_t>(f.corners[c].x));
      EXPECT_EQ(std::bit_cast<std::uint64_t>(v.y), std::bit_cast<std::uint64_t>(f.corners[c].y));
      EXPECT_EQ(std::bit_cast<std::uint64_t>(v.z), std::bit_cast<std::uint64_t>(f.corners[c].z));
    }
  }
  for (const auto& [a, b] : lines) {
    EXPECT_GE(a, 1);
    EXPECT_LE(b, 40);
  }
  // colours run over the dataset's span, 0 s .. 0.49 s
  std::ifstream mtl(dir / "a" / "frusta.mtl");
  std::size_t k = 0;
  while (std::getline(mtl, line)) {
    if (line.rfind("Kd ", 0) != 0) continue;
    double r, g, b;
    std::istringstream(line.substr(3)) >> r >> g >> b;
    const double u = (0.1 * static_cast<double>(k)) / 0.49;
    EXPECT_EQ(std::lround(r * 255.0), std::lround(std::floor(255.0 * u + 0.5))) << line;
    EXPECT_EQ(g, 0.0);
    EXPECT_EQ(std::lround(b * 255.0), std::lround(std::floor(255.0 * (1.0 - u) + 0.5))) << line;
    ++k;
  }
  EXPECT_EQ(k, 5u);

  const auto hits = util::read_file(dir / "a" / "hits.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(hits.begin(), hits.end(), '\n')), 51u);
  const auto stats = util::read_file(dir / "a" / "stats.csv");
  EXPECT_NE(stats.find("fixation_count,1\n"), std::string::npos);
  const auto at = stats.find("dwell_ms_body_2,");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NEAR(std::stod(stats.substr(at + 16)), 500.0, 1e-9);  // 50 records of 10 ms

  EXPECT_THROW(export_artifacts({}, {}, dir / "c", p, 1), EvalError);
  EXPECT_THROW(export_artifacts(ds, {}, dir / "c", p, 0), EvalError);
}

TEST(Objects, LoadAndValidate) {
  support::TempDir dir;
  util::write_file(dir / "o.toml", "[[objects]]\nbody_id = 2\nradius_m = 0.2\nname = \"cup\"\n\n[[objects]]\nbody_id = 5\n");
  const auto o = load_objects(dir / "o.toml");
  ASSERT_EQ(o.size(), 2u);
  EXPECT_EQ(o[0].name, "cup");
  EXPECT_EQ(o[0].radius_m, 0.2);
  EXPECT_EQ(o[1].radius_m, 0.15);
  EXPECT_EQ(o[1].name, "body5");
  util::write_file(dir / "dup.toml", "[[objects]]\nbody_id = 2\n[[objects]]\nbody_id = 2\n");
  EXPECT_THROW(load_objects(dir / "dup.toml"), EvalError);
  util::write_file(dir / "neg.toml", "[[objects]]\nbody_id = 2\nradius_m = -1.0\n");
  EXPECT_THROW(load_objects(dir / "neg.toml"), EvalError);
  EXPECT_THROW(load_objects(dir / "none.toml"), EvalError);
}
