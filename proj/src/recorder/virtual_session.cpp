#include "pesao/recorder/virtual_session.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <queue>
#include <random>

#include "pesao/sim/server.hpp"
#include "pesao/sim/simulators.hpp"
#include "pesao/wire/message.hpp"

namespace pesao::recorder {
namespace {

struct Event {
  double t;
  std::uint64_t seq;
  std::function<void()> run;
  bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

class EventLoop {
 public:
  void at(double t, std::function<void()> fn) { q_.push({t, seq_++, std::move(fn)}); }
  /// Runs events in time order; `after` sees the world time of each one.
  void run(const std::function<void(double)>& after) {
    while (!q_.empty()) {
      Event e = q_.top();
      q_.pop();
      e.run();
      after(e.t);
    }
  }

 private:
  std::priority_queue<Event, std::vector<Event>, std::greater<>> q_;
  std::uint64_t seq_ = 0;
};

struct Link {
  std::unique_ptr<sim::EmissionSource> source;
  std::unique_ptr<StreamIngest> ingest;
  std::size_t index = 0;
  std::uint64_t emitted = 0;
  double last_up = -std::numeric_limits<double>::infinity();
  double last_down = -std::numeric_limits<double>::infinity();
};

}  // namespace

const VirtualStreamResult* VirtualSessionResult::find(const std::string& name) const {
  for (const auto& s : streams) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

VirtualSessionResult run_virtual_session(const sim::Scenario& s, const VirtualSessionOptions& opt) {
  std::unique_ptr<sim::GroundTruthWriter> truth;
  if (opt.ground_truth) truth = std::make_unique<sim::GroundTruthWriter>(*opt.ground_truth, s);

  std::vector<std::unique_ptr<Link>> links;
  std::vector<StreamInfo> infos;
  const auto add = [&](std::unique_ptr<sim::EmissionSource> src, const char* uid) {
    auto link = std::make_unique<Link>();
    StreamInfo info = src->info(uid);
    info.host = "virtual";
    link->index = infos.size();
    link->ingest = std::make_unique<StreamIngest>(info, opt.timesync_period_s);
    link->source = std::move(src);
    infos.push_back(info);
    links.push_back(std::move(link));
  };
  if (opt.with_mocap) add(sim::make_mocap_source(s, s.seed, truth.get()), "virtual-mocap");
  if (opt.with_gaze) add(sim::make_gaze_source(s, s.seed, opt.native_log, truth.get()), "virtual-gaze");
  if (opt.with_light) add(sim::make_light_source(s), "virtual-light");
  const std::size_t control = infos.size();
  infos.push_back({"virtual-control", sim::kControlStreamName, StreamType::control, 0.0, 2, "virtual", 0});

  nlohmann::json meta = opt.metadata;
  if (!meta.contains("session")) meta["session"] = "virtual";
  ContainerSink sink(opt.container, meta, infos, opt.boundary_period_s);

  std::mt19937_64 rng(opt.seed ^ 0x6c696e6bULL);
  std::uniform_real_distribution<double> jitter(-s.link.jitter_s, s.link.jitter_s);
  std::bernoulli_distribution lost(s.link.loss_prob);
  const auto delay = [&] { return s.link.jitter_s > 0.0 ? s.link.delay_s + jitter(rng) : s.link.delay_s; };

  EventLoop loop;

  const auto deliver = [&](Link& l, std::string line, double arrival) {
    loop.at(arrival, [&l, &sink, line = std::move(line), arrival] {
      if (auto item = l.ingest->on_line(line, WorldTime{arrival})) sink.apply(l.index, *item);
    });
  };

  std::function<void(Link&)> emit = [&](Link& l) {
    const double t = l.source->next_time();
    auto lines = l.source->next_lines();
    ++l.emitted;
    const bool drop = s.link.loss_prob > 0.0 && lost(rng);
    if (!drop) {
      for (auto& line : lines) {
        l.last_up = std::max(l.last_up, t + delay());
        deliver(l, std::move(line), l.last_up);
      }
    }
    if (l.source->done()) {
      l.source->finish();
    } else {
      loop.at(l.source->next_time(), [&emit, &l] { emit(l); });
    }
  };

  const auto timesync = [&](Link& l, double t1) {
    auto req = l.ingest->poll_timesync(WorldTime{t1});
    if (!req) return;
    const auto decoded = std::get<wire::TimesyncRequest>(wire::decode_message(*req));
    l.last_down = std::max(l.last_down, t1 + delay());
    const double t_dev = l.last_down;
    loop.at(t_dev, [&, decoded, t_dev, lp = &l] {
      const DeviceTime d{lp->source->clock().device(t_dev)};
      lp->last_up = std::max(lp->last_up, t_dev + delay());
      deliver(*lp, wire::encode_message(wire::make_reply(decoded, d, d)), lp->last_up);
    });
  };

  for (auto& l : links) {
    if (!l->source->done()) loop.at(l->source->next_time(), [&emit, lp = l.get()] { emit(*lp); });
    // stagger exchanges so streams do not all sync in the same instant
    const double stagger = 1e-3 * static_cast<double>(l->index + 1);
    for (double t = stagger; t <= s.duration_s; t += opt.timesync_period_s) {
      loop.at(t, [&timesync, lp = l.get(), t] { timesync(*lp, t); });
    }
  }
  for (double t = 0.0; t <= s.duration_s; t += opt.timesync_period_s) {
    loop.at(t, [&sink, control, t] { sink.apply(control, OffsetItem{t, 0.0}); });
  }
  for (const auto& [t, text] : opt.notes) {
    loop.at(t, [&sink, control, t, text] {
      const MarkerEvent e{DeviceTime{t}, MarkerKind::note, text};
      const auto sample = wire::marker_sample(e);
      sink.apply(control, SampleItem{{t, std::get<std::vector<std::string>>(sample.values)}});
    });
  }

  loop.run([&sink](double t) { sink.tick(WorldTime{t}); });
  sink.finalize();
  if (truth) truth->close();

  VirtualSessionResult result;
  for (const auto& l : links) {
    result.streams.push_back({infos[l->index].name, l->emitted, sink.counts(l->index)});
  }
  result.streams.push_back({infos[control].name, opt.notes.size(), sink.counts(control)});
  return result;
}

}  // namespace pesao::recorder
