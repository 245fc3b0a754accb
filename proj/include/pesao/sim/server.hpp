#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pesao/sim/scenario.hpp"
#include "pesao/sim/simulators.hpp"
#include "pesao/wire/discovery.hpp"
#include "pesao/wire/net.hpp"

namespace pesao::sim {

/// Wire lines of one simulated stream in true-time order.
class EmissionSource {
 public:
  virtual ~EmissionSource() = default;
  [[nodiscard]] virtual bool done() const = 0;
  [[nodiscard]] virtual double next_time() const = 0;
  [[nodiscard]] virtual std::size_t total() const = 0;
  [[nodiscard]] virtual const SimClock& clock() const = 0;
  [[nodiscard]] virtual StreamInfo info(const std::string& uid) const = 0;
  /// Encoded lines (newline-terminated) for the next emission.
  virtual std::vector<std::string> next_lines() = 0;
  virtual void finish() {}
};

std::unique_ptr<EmissionSource> make_mocap_source(const Scenario& s, std::uint64_t seed,
                                                  GroundTruthWriter* truth = nullptr);
std::unique_ptr<EmissionSource> make_gaze_source(const Scenario& s, std::uint64_t seed,
                                                 const std::optional<std::filesystem::path>& native_log,
                                                 GroundTruthWriter* truth = nullptr);
std::unique_ptr<EmissionSource> make_light_source(const Scenario& s);

struct ServerOptions {
  int port = 0;
  bool accelerated = false;
  bool announce = true;
  int discovery_port = wire::discovery_port();
  std::string uid;            // empty: derived from name, pid and port
  std::string announce_host;  // empty: discoverers use the datagram source
  LinkParams link;
  std::uint64_t seed = 1;     // link jitter and loss
};

/// Serves one simulated stream over TCP. The scenario plays once, starting
/// when the first subscriber connects; later subscribers get whatever is
/// left. Timesync requests are answered on the same clock for as long as a
/// subscriber stays connected.
///
/// Real-time mode paces emissions on the steady clock and delays every
/// outgoing line (and the handling of incoming requests) by the configured
/// link delay +- jitter, FIFO per direction. Accelerated mode emits as fast
/// as the subscriber reads; its device clock follows the virtual time of the
/// last emission.
class SimServer {
 public:
  SimServer(std::unique_ptr<EmissionSource> source, ServerOptions options);
  ~SimServer();
  SimServer(const SimServer&) = delete;
  SimServer& operator=(const SimServer&) = delete;

  void start();
  void stop();

  [[nodiscard]] int port() const { return listener_.port(); }
  [[nodiscard]] const StreamInfo& info() const { return info_; }
  /// Samples generated so far / lines of them actually sent.
  [[nodiscard]] std::size_t emitted() const { return emitted_; }
  [[nodiscard]] std::size_t sent() const { return sent_; }
  [[nodiscard]] bool finished() const { return finished_; }
  [[nodiscard]] std::size_t total() const { return source_->total(); }

 private:
  void accept_loop();
  void session_realtime(wire::LineConnection& conn);
  void session_accelerated(wire::LineConnection& conn);
  std::string reply_line(const wire::TimesyncRequest& req, double t_true);
  double draw_delay();
  bool draw_loss();

  std::unique_ptr<EmissionSource> source_;
  ServerOptions opt_;
  wire::TcpListener listener_;
  StreamInfo info_;
  std::unique_ptr<wire::DiscoveryResponder> responder_;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::atomic<std::size_t> emitted_{0};
  std::atomic<std::size_t> sent_{0};
  std::atomic<bool> finished_{false};
  std::mt19937_64 link_rng_;
  std::optional<std::chrono::steady_clock::time_point> t0_;
  double virtual_now_ = 0.0;
};

std::string default_uid(const std::string& name, int port);

}  // namespace pesao::sim
