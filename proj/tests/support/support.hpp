#pragma once

#include <filesystem>
#include <string>

#include "pesao/sim/scenario.hpp"
#include "pesao/xdf/xdf.hpp"

namespace pesao::support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pesao");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Level head orientation looking along world +x (glasses z forward, y up),
/// optionally turned by `yaw_deg` about world z.
Quaternion level_head(double yaw_deg = 0.0);

/// Stationary head at (-1, 0, 1.6) fixating one target; no noise, identity clocks.
sim::Scenario basic_scenario(double duration_s = 10.0);

/// Clock and link conditions of the synchronization requirement: gaze clock
/// offset 37.5 s, drift +50 ppm, link delay 500 us +- 100 us, 60 s.
sim::Scenario sync_scenario();

/// 12 fixations and 8 saccades at 100 Hz, no noise. Three blinks separate
/// fixation runs that no saccade connects.
sim::Scenario ivt_scenario();

/// Walking and turning head, objects 1-2 m away, fixations on each object.
/// Knots sit on mocap frame times so frame interpolation is exact.
sim::Scenario fusion_scenario(double gaze_noise_deg);

/// Ten bodies (head + 9 objects) at 120 Hz, gaze at 100 Hz, light cues.
sim::Scenario zero_loss_scenario(double duration_s = 60.0);

/// State of a container right after one of its Boundary chunks.
struct BoundaryMark {
  std::uint64_t end_offset = 0;
  std::size_t streams = 0;                  // headers written so far, in order
  std::vector<std::size_t> samples;         // per stream
  std::vector<std::size_t> clock_offsets;   // per stream
};

/// A container written from random content, with what the writer was fed.
struct RandomSession {
  xdf::Recording expected;  // footers included
  std::vector<BoundaryMark> boundaries;
};

/// Random streams (numeric and string, regular and irregular), clock offsets
/// and boundaries interleaved in random batches.
RandomSession write_random_session(const std::filesystem::path& path, std::uint64_t seed);

/// Field-by-field comparison of `got` against the first `mark` of `want`
/// (everything, footers included, when mark is null). Returns an empty
/// string on a match.
std::string compare_recordings(const xdf::Recording& got, const xdf::Recording& want,
                               const BoundaryMark* mark = nullptr);

/// Path of a built tool, from the PESAO_TOOLS_DIR compile definition.
std::filesystem::path tool_path(const std::string& name);

/// Hex SHA-256 via the system `sha256sum`, an implementation independent of
/// the library's.
std::string sha256sum(const std::filesystem::path& p);

}  // namespace pesao::support
