#pragma once

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "pesao/core/types.hpp"
#include "pesao/wire/net.hpp"

namespace pesao::wire {

inline constexpr int kDefaultDiscoveryPort = 15800;

/// PESAO_DISCOVERY_PORT when set and valid, else 15800.
int discovery_port();

/// Collapses announces to one entry per uid (last one wins) ordered by
/// (name, uid). Announces with an empty or wildcard host take the sender's
/// address.
std::vector<StreamInfo> dedupe_streams(std::vector<StreamInfo> announced);

/// Broadcasts a probe and gathers Announce replies until `timeout` elapses.
std::vector<StreamInfo> discover_streams(std::chrono::milliseconds timeout,
                                         int port = discovery_port());

/// Device side of discovery: answers every probe on the discovery port with
/// one Announce per stream it serves.
class DiscoveryResponder {
 public:
  DiscoveryResponder(std::vector<StreamInfo> streams, int port = discovery_port());
  ~DiscoveryResponder();
  DiscoveryResponder(const DiscoveryResponder&) = delete;
  DiscoveryResponder& operator=(const DiscoveryResponder&) = delete;

  void stop();

 private:
  void run();

  std::vector<StreamInfo> streams_;
  UdpSocket socket_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

}  // namespace pesao::wire
