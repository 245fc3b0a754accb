#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pesao/proc/dataset.hpp"

namespace pesao::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FrustumParams {
  double hfov_deg = 82.0;
  double vfov_deg = 52.0;
  double near_m = 0.1;
  double far_m = 4.0;
};

/// Camera frame: x right, y up, z forward. Corners 0-3 lie on the near
/// plane, 4-7 on the far plane, each ordered (-x,-y) (+x,-y) (+x,+y) (-x,+y).
struct Frustum {
  std::array<Vec3, 8> corners;
  Pose apex;
  FrustumParams params;
  double t_world = 0.0;
};

/// Throws EvalError unless 0 < fov < 180 and 0 < near < far.
void check_params(const FrustumParams& p);
Frustum compute_frustum(const Pose& head, const FrustumParams& p, double t_world);

/// Edge list over corner indices: near quad, far quad, then the four sides.
const std::array<std::array<int, 2>, 12>& frustum_edges();

/// Blue -> red ramp, components rounded half up.
std::array<int, 3> temporal_color(double t, double t0, double t1);

struct ObjectSpec {
  int body_id = 0;
  double radius_m = 0.15;
  std::string name;
};
/// [[objects]] tables with body_id, radius_m and an optional name.
std::vector<ObjectSpec> load_objects(const std::filesystem::path& path);

struct HitRecord {
  double t_world = 0.0;
  std::size_t record = 0;
  int body_id = 0;
  bool in_front = false;  // positive ray parameter at the closest point
  bool hit = false;       // in_front && distance <= radius
  double distance_m = 0.0;
};

/// Perpendicular distance from the ray's line to `center` and whether the
/// center lies ahead of the origin.
std::pair<double, bool> ray_point_distance(const Vec3& origin, const Vec3& dir, const Vec3& center);

struct HitResult {
  std::vector<HitRecord> hits;
  std::map<int, double> dwell_ms;  // per body id
};

/// Throws EvalError for a body id that no record carries.
HitResult gaze_object_hits(const proc::SyncedDataset& ds, const std::vector<ObjectSpec>& objects);

struct SummaryStats {
  std::size_t fixation_count = 0;
  double fixation_total_ms = 0.0;
  double fixation_mean_ms = 0.0;
  double fixation_median_ms = 0.0;
  std::size_t saccade_count = 0;
};
/// Counts and durations from the dataset's segments. Per-object dwell comes
/// with the hit analysis.
SummaryStats fixation_stats(const proc::SyncedDataset& ds);

/// Writes frusta.obj + frusta.mtl, hits.csv and stats.csv. Returns sha256 by file name.
std::map<std::string, std::string> export_artifacts(const proc::SyncedDataset& ds,
                                                    const std::vector<ObjectSpec>& objects,
                                                    const std::filesystem::path& out_dir, const FrustumParams& p,
                                                    std::size_t stride);

}  // namespace pesao::eval
