#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pesao/recorder/ingest.hpp"
#include "pesao/sim/scenario.hpp"

namespace pesao::recorder {

struct VirtualSessionOptions {
  std::filesystem::path container;
  std::optional<std::filesystem::path> native_log;
  std::optional<std::filesystem::path> ground_truth;
  bool with_mocap = true;
  bool with_gaze = true;
  bool with_light = true;
  double timesync_period_s = 2.0;
  double boundary_period_s = 10.0;
  std::uint64_t seed = 1;
  /// Operator notes on the Control stream: (world time, text).
  std::vector<std::pair<double, std::string>> notes;
  nlohmann::json metadata = nlohmann::json::object();
};

struct VirtualStreamResult {
  std::string name;
  std::uint64_t emitted = 0;
  StreamCounts recorded;
};

struct VirtualSessionResult {
  std::vector<VirtualStreamResult> streams;
  [[nodiscard]] const VirtualStreamResult* find(const std::string& name) const;
};

/// Runs the simulators and the recorder's ingest path against one virtual
/// clock in a discrete-event loop. World time equals the simulators' true
/// time, so reconstructed timestamps can be compared to ground truth
/// directly. Lines travel with the scenario's link delay +- uniform jitter,
/// FIFO per direction; timesync requests go out every timesync_period_s.
VirtualSessionResult run_virtual_session(const sim::Scenario& s, const VirtualSessionOptions& opt);

}  // namespace pesao::recorder
