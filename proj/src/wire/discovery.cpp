#include "pesao/wire/discovery.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <string>

#include "pesao/wire/message.hpp"

namespace pesao::wire {

int discovery_port() {
  if (const char* env = std::getenv("PESAO_DISCOVERY_PORT")) {
    try {
      const int p = std::stoi(env);
      if (p > 0 && p < 65536) return p;
    } catch (const std::exception&) {
    }
  }
  return kDefaultDiscoveryPort;
}

std::vector<StreamInfo> dedupe_streams(std::vector<StreamInfo> announced) {
  std::map<std::string, StreamInfo> by_uid;
  for (auto& s : announced) by_uid[s.uid] = std::move(s);
  std::vector<StreamInfo> out;
  out.reserve(by_uid.size());
  for (auto& [uid, s] : by_uid) out.push_back(std::move(s));
  std::stable_sort(out.begin(), out.end(), [](const StreamInfo& a, const StreamInfo& b) {
    return a.name != b.name ? a.name < b.name : a.uid < b.uid;
  });
  return out;
}

std::vector<StreamInfo> discover_streams(std::chrono::milliseconds timeout, int port) {
  if (timeout.count() <= 0) throw std::invalid_argument("discovery timeout must be positive");
  UdpSocket sock = UdpSocket::bind(0, /*broadcast=*/true);
  const std::string probe = encode_message(DiscoverProbe{});
  const bool sent_bcast = sock.try_send_to("255.255.255.255", port, probe);
  const bool sent_lo = sock.try_send_to("127.255.255.255", port, probe);
  if (!sent_bcast && !sent_lo) throw NetworkError("network unavailable: discovery probe not sent");

  std::vector<StreamInfo> found;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) break;
    const auto dg = sock.receive(left);
    if (!dg) break;
    try {
      const Message m = decode_message(dg->payload);
      if (const auto* a = std::get_if<Announce>(&m)) {
        StreamInfo info = a->info;
        if (info.host.empty() || info.host == "0.0.0.0") info.host = dg->from_host;
        found.push_back(std::move(info));
      }
    } catch (const DecodeError&) {
      // not ours
    }
  }
  return dedupe_streams(std::move(found));
}

DiscoveryResponder::DiscoveryResponder(std::vector<StreamInfo> streams, int port)
    : streams_(std::move(streams)), socket_(UdpSocket::bind(port)) {
  thread_ = std::thread([this] { run(); });
}

DiscoveryResponder::~DiscoveryResponder() { stop(); }

void DiscoveryResponder::stop() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
}

void DiscoveryResponder::run() {
  while (!stop_) {
    std::optional<Datagram> dg;
    try {
      dg = socket_.receive(std::chrono::milliseconds(100));
    } catch (const NetworkError&) {
      return;
    }
    if (!dg) continue;
    try {
      if (!std::holds_alternative<DiscoverProbe>(decode_message(dg->payload))) continue;
    } catch (const DecodeError&) {
      continue;
    }
    for (const auto& s : streams_) {
      socket_.try_send_to(dg->from_host, dg->from_port, encode_message(Announce{s}));
    }
  }
}

}  // namespace pesao::wire
