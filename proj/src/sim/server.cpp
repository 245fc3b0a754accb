#include "pesao/sim/server.hpp"

#include <unistd.h>

#include <queue>

#include <fmt/format.h>

#include "pesao/wire/timesync.hpp"

namespace pesao::sim {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0, Clock::time_point t) {
  return std::chrono::duration<double>(t - t0).count();
}

class MocapSource : public EmissionSource {
 public:
  MocapSource(const Scenario& s, std::uint64_t seed, GroundTruthWriter* truth)
      : sim_(s, seed), truth_(truth) {}
  bool done() const override { return sim_.done(); }
  double next_time() const override { return sim_.next_time(); }
  std::size_t total() const override { return sim_.total(); }
  const SimClock& clock() const override { return sim_.clock(); }
  StreamInfo info(const std::string& uid) const override { return sim_.stream_info(uid); }
  std::vector<std::string> next_lines() override {
    const auto e = sim_.next();
    if (truth_ != nullptr) truth_->add(e);
    return {wire::encode_message(wire::Sample{e.frame.t, e.frame.to_channels()})};
  }

 private:
  MocapSim sim_;
  GroundTruthWriter* truth_;
};

class GazeSource : public EmissionSource {
 public:
  GazeSource(const Scenario& s, std::uint64_t seed,
             const std::optional<std::filesystem::path>& native_log, GroundTruthWriter* truth)
      : sim_(s, seed, native_log), truth_(truth) {}
  bool done() const override { return sim_.done(); }
  double next_time() const override { return sim_.next_time(); }
  std::size_t total() const override { return sim_.total(); }
  const SimClock& clock() const override { return sim_.clock(); }
  StreamInfo info(const std::string& uid) const override { return sim_.stream_info(uid); }
  std::vector<std::string> next_lines() override {
    const auto e = sim_.next();
    if (truth_ != nullptr) truth_->add(e);
    std::vector<std::string> lines;
    if (e.beacon) lines.push_back(wire::encode_message(*e.beacon));
    lines.push_back(wire::encode_message(wire::Sample{e.sample.t, e.sample.to_channels()}));
    return lines;
  }
  void finish() override { sim_.finish(); }

 private:
  GazeSim sim_;
  GroundTruthWriter* truth_;
};

class LightSource : public EmissionSource {
 public:
  explicit LightSource(const Scenario& s) : sim_(s) {}
  bool done() const override { return sim_.done(); }
  double next_time() const override { return sim_.next_time(); }
  std::size_t total() const override { return sim_.total(); }
  const SimClock& clock() const override { return sim_.clock(); }
  StreamInfo info(const std::string& uid) const override { return sim_.stream_info(uid); }
  std::vector<std::string> next_lines() override {
    return {wire::encode_message(wire::marker_sample(sim_.next().event))};
  }

 private:
  LightSim sim_;
};

}  // namespace

std::unique_ptr<EmissionSource> make_mocap_source(const Scenario& s, std::uint64_t seed,
                                                  GroundTruthWriter* truth) {
  return std::make_unique<MocapSource>(s, seed, truth);
}

std::unique_ptr<EmissionSource> make_gaze_source(const Scenario& s, std::uint64_t seed,
                                                 const std::optional<std::filesystem::path>& native_log,
                                                 GroundTruthWriter* truth) {
  return std::make_unique<GazeSource>(s, seed, native_log, truth);
}

std::unique_ptr<EmissionSource> make_light_source(const Scenario& s) {
  return std::make_unique<LightSource>(s);
}

std::string default_uid(const std::string& name, int port) {
  return fmt::format("{}-{}-{}", name, ::getpid(), port);
}

SimServer::SimServer(std::unique_ptr<EmissionSource> source, ServerOptions options)
    : source_(std::move(source)),
      opt_(std::move(options)),
      listener_(opt_.port),
      link_rng_(opt_.seed) {
  const std::string uid = opt_.uid.empty() ? default_uid(source_->info("").name, listener_.port())
                                           : opt_.uid;
  info_ = source_->info(uid);
  info_.host = opt_.announce_host;
  info_.port = listener_.port();
  if (source_->done()) {
    source_->finish();
    finished_ = true;
  }
}

SimServer::~SimServer() { stop(); }

void SimServer::start() {
  if (opt_.announce) {
    responder_ = std::make_unique<wire::DiscoveryResponder>(std::vector<StreamInfo>{info_},
                                                            opt_.discovery_port);
  }
  thread_ = std::thread([this] { accept_loop(); });
}

void SimServer::stop() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
  if (responder_) responder_->stop();
  listener_.close();
}

double SimServer::draw_delay() {
  if (opt_.link.jitter_s <= 0.0) return opt_.link.delay_s;
  std::uniform_real_distribution<double> u(-opt_.link.jitter_s, opt_.link.jitter_s);
  return opt_.link.delay_s + u(link_rng_);
}

bool SimServer::draw_loss() {
  if (opt_.link.loss_prob <= 0.0) return false;
  std::bernoulli_distribution lost(opt_.link.loss_prob);
  return lost(link_rng_);
}

std::string SimServer::reply_line(const wire::TimesyncRequest& req, double t_true) {
  const DeviceTime dev{source_->clock().device(t_true)};
  return wire::encode_message(wire::make_reply(req, dev, dev));
}

void SimServer::accept_loop() {
  while (!stop_) {
    std::optional<wire::LineConnection> conn;
    try {
      conn = listener_.accept(std::chrono::milliseconds(100));
    } catch (const wire::NetworkError&) {
      return;
    }
    if (!conn) continue;
    try {
      if (opt_.accelerated) {
        session_accelerated(*conn);
      } else {
        session_realtime(*conn);
      }
    } catch (const wire::NetworkError&) {
      // subscriber went away; wait for the next one
    }
  }
}

void SimServer::session_accelerated(wire::LineConnection& conn) {
  const auto answer_pending = [&](std::chrono::milliseconds wait) {
    while (auto line = conn.read_line(wait)) {
      try {
        const auto m = wire::decode_message(*line);
        if (const auto* req = std::get_if<wire::TimesyncRequest>(&m)) {
          conn.write_line(reply_line(*req, virtual_now_));
        }
      } catch (const wire::DecodeError&) {
      }
      wait = std::chrono::milliseconds(0);
    }
  };

  std::size_t n = 0;
  while (!stop_ && !source_->done()) {
    virtual_now_ = source_->next_time();
    const auto lines = source_->next_lines();
    ++emitted_;
    if (!draw_loss()) {
      for (const auto& l : lines) conn.write_line(l);
      ++sent_;
    }
    if (source_->done()) {
      source_->finish();
      finished_ = true;
    }
    if (++n % 64 == 0) answer_pending(std::chrono::milliseconds(0));
  }
  while (!stop_) answer_pending(std::chrono::milliseconds(100));
}

void SimServer::session_realtime(wire::LineConnection& conn) {
  enum class Kind { emit, request, write };
  struct Event {
    Clock::time_point when;
    std::uint64_t seq;
    Kind kind;
    std::string line;
    wire::TimesyncRequest req;
    bool operator>(const Event& o) const { return when != o.when ? when > o.when : seq > o.seq; }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  std::uint64_t seq = 0;
  Clock::time_point last_out{};
  Clock::time_point last_in{};

  if (!t0_) t0_ = Clock::now();
  const auto at_true = [&](double t) {
    return *t0_ + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(t));
  };
  const auto delayed = [&](Clock::time_point now, Clock::time_point& last) {
    const auto when =
        now + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(draw_delay()));
    last = std::max(last, when);
    return last;
  };

  if (!source_->done()) events.push({at_true(source_->next_time()), seq++, Kind::emit, {}, {}});

  while (!stop_) {
    auto now = Clock::now();
    while (!events.empty() && events.top().when <= now) {
      Event ev = events.top();
      events.pop();
      switch (ev.kind) {
        case Kind::emit: {
          const auto lines = source_->next_lines();
          ++emitted_;
          if (!draw_loss()) {
            for (const auto& l : lines) events.push({delayed(now, last_out), seq++, Kind::write, l, {}});
            ++sent_;
          }
          if (source_->done()) {
            source_->finish();
            finished_ = true;
          } else {
            events.push({at_true(source_->next_time()), seq++, Kind::emit, {}, {}});
          }
          break;
        }
        case Kind::request: {
          const std::string reply = reply_line(ev.req, seconds_since(*t0_, Clock::now()));
          events.push({delayed(Clock::now(), last_out), seq++, Kind::write, reply, {}});
          break;
        }
        case Kind::write:
          conn.write_line(ev.line);
          break;
      }
      now = Clock::now();
    }

    auto wait = std::chrono::milliseconds(20);
    if (!events.empty()) {
      const auto until = std::chrono::duration_cast<std::chrono::milliseconds>(events.top().when - now);
      wait = std::clamp(until, std::chrono::milliseconds(0), wait);
    }
    if (auto line = conn.read_line(wait)) {
      try {
        const auto m = wire::decode_message(*line);
        if (const auto* req = std::get_if<wire::TimesyncRequest>(&m)) {
          events.push({delayed(Clock::now(), last_in), seq++, Kind::request, {}, *req});
        }
      } catch (const wire::DecodeError&) {
      }
    }
  }
}

}  // namespace pesao::sim
