#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pesao/core/types.hpp"
#include "pesao/recorder/ingest.hpp"
#include "pesao/sim/simulators.hpp"
#include "pesao/wire/discovery.hpp"

namespace pesao::recorder {

enum class Phase { idle, armed, recording, stopping };
std::string_view to_string(Phase p);

/// Bad request: validation failures, unknown streams, unreachable devices.
class RecorderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The request is valid but the recorder is in the wrong phase, or another
/// transition is in flight.
class StateConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionMeta {
  std::string subject_id;
  std::string session_name;
  std::filesystem::path study_root;  // empty: the service default
  std::string experimenter;
  std::optional<sim::TrialPlan> trial_plan;
};

SessionMeta session_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionMeta& m);
nlohmann::json to_json(const StreamInfo& s);

struct RecorderConfig {
  std::filesystem::path study_root;
  std::chrono::milliseconds discovery_timeout{500};
  int discovery_port = wire::discovery_port();
  double timesync_period_s = 2.0;
  double timesync_timeout_s = 1.0;
  std::size_t queue_capacity = 4096;
  double boundary_period_s = 10.0;
  double rate_window_s = 2.0;
  std::chrono::milliseconds connect_timeout{2000};
};

/// Per-stream bounded queues drained by one consumer. Producers block while
/// their queue is full (back-pressure) unless the queues are closed.
class IngestQueues {
 public:
  IngestQueues(std::size_t streams, std::size_t capacity);

  /// False when the queues were closed before the item could be queued.
  bool push(std::size_t stream, IngestItem item);
  /// Waits up to `timeout` for data, then takes everything queued.
  std::vector<std::vector<IngestItem>> pop_all(std::chrono::milliseconds timeout);
  void close();
  [[nodiscard]] std::size_t depth(std::size_t stream) const;
  [[nodiscard]] bool empty() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::vector<std::deque<IngestItem>> queues_;
  std::size_t capacity_;
  bool closed_ = false;
};

class RecorderService {
 public:
  explicit RecorderService(RecorderConfig config);
  ~RecorderService();
  RecorderService(const RecorderService&) = delete;
  RecorderService& operator=(const RecorderService&) = delete;

  /// Seconds on the recorder (world) clock.
  [[nodiscard]] double world_now() const;

  /// Discovers devices; keeps selections whose uid survives. The built-in
  /// Control stream is always listed. Not allowed while recording.
  std::vector<StreamInfo> refresh_streams();
  /// Replaces the known device list without discovery.
  void set_known_streams(std::vector<StreamInfo> streams);
  [[nodiscard]] std::vector<StreamInfo> streams() const;
  void select(const std::vector<std::string>& uids);

  /// All-or-nothing: connects every selected device before the container
  /// is created. Returns the manifest stub.
  nlohmann::json start_recording(const std::vector<std::string>& selection, SessionMeta meta);
  /// Finalizes, verifies footers and writes the manifest sidecar.
  nlohmann::json stop_recording();

  MarkerEvent post_note(const std::string& text);
  MarkerEvent post_answer(int trial_index, const std::string& answer);
  MarkerEvent mark_trial(MarkerKind kind, int trial_index);

  sim::TrialPlan generate_trials(std::uint64_t seed, const std::vector<std::string>& conditions,
                                 int repetitions);
  [[nodiscard]] std::optional<sim::TrialPlan> trials() const;

  [[nodiscard]] nlohmann::json status() const;
  [[nodiscard]] Phase phase() const { return phase_; }

  using Listener = std::function<void(const nlohmann::json&)>;
  int add_listener(Listener l);
  void remove_listener(int id);

  [[nodiscard]] const StreamInfo& control_stream() const { return control_; }

 private:
  struct Link;
  struct Active;

  void notify(const nlohmann::json& event);
  MarkerEvent post_marker(MarkerKind kind, std::string payload);
  void reader_loop(Link& link);
  void writer_loop();
  void set_phase(Phase p);
  void teardown_links();
  nlohmann::json finish_recording();

  RecorderConfig config_;
  std::chrono::steady_clock::time_point epoch_;
  StreamInfo control_;

  mutable std::mutex mu_;  // streams, selection, plan, active bookkeeping
  std::vector<StreamInfo> known_;
  std::vector<std::string> selected_;
  std::optional<sim::TrialPlan> plan_;
  std::atomic<Phase> phase_{Phase::idle};
  std::mutex transition_;
  std::unique_ptr<Active> active_;
  std::optional<nlohmann::json> last_manifest_;

  std::mutex listeners_mu_;
  std::map<int, Listener> listeners_;
  int next_listener_ = 1;
};

}  // namespace pesao::recorder
