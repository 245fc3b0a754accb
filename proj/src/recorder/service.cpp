#include "pesao/recorder/service.hpp"

#include <unistd.h>

#include <algorithm>
#include <ctime>

#include <fmt/format.h>

#include "pesao/util/io.hpp"
#include "pesao/wire/message.hpp"
#include "pesao/xdf/xdf.hpp"

namespace pesao::recorder {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::idle:
      return "idle";
    case Phase::armed:
      return "armed";
    case Phase::recording:
      return "recording";
    case Phase::stopping:
      return "stopping";
  }
  return "idle";
}

SessionMeta session_from_json(const json& j) {
  if (!j.is_object()) throw RecorderError("session must be an object");
  SessionMeta m;
  const auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || j.at(key).is_null()) return {};
    if (!j.at(key).is_string()) throw RecorderError(fmt::format("session.{} must be a string", key));
    return j.at(key).get<std::string>();
  };
  m.subject_id = str("subject_id");
  m.session_name = str("session_name");
  m.study_root = str("study_root");
  m.experimenter = str("experimenter");
  if (j.contains("trial_plan") && !j.at("trial_plan").is_null()) {
    try {
      m.trial_plan = sim::trial_plan_from_json(j.at("trial_plan"));
    } catch (const json::exception& e) {
      throw RecorderError(std::string("bad trial_plan: ") + e.what());
    }
  }
  return m;
}

json to_json(const SessionMeta& m) {
  return {{"subject_id", m.subject_id},
          {"session_name", m.session_name},
          {"study_root", m.study_root.string()},
          {"experimenter", m.experimenter},
          {"trial_plan", m.trial_plan ? sim::to_json(*m.trial_plan) : json(nullptr)}};
}

json to_json(const StreamInfo& s) {
  return {{"uid", s.uid},
          {"name", s.name},
          {"type", std::string(to_string(s.type))},
          {"nominal_rate_hz", s.nominal_rate_hz},
          {"channel_count", s.channel_count},
          {"host", s.host},
          {"port", s.port}};
}

// ---- queues

IngestQueues::IngestQueues(std::size_t streams, std::size_t capacity)
    : queues_(streams), capacity_(capacity) {}

bool IngestQueues::push(std::size_t stream, IngestItem item) {
  std::unique_lock lk(mu_);
  not_full_.wait(lk, [&] { return closed_ || queues_[stream].size() < capacity_; });
  if (closed_) return false;
  queues_[stream].push_back(std::move(item));
  not_empty_.notify_one();
  return true;
}

std::vector<std::vector<IngestItem>> IngestQueues::pop_all(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  not_empty_.wait_for(lk, timeout, [&] {
    return closed_ || std::any_of(queues_.begin(), queues_.end(), [](const auto& q) { return !q.empty(); });
  });
  std::vector<std::vector<IngestItem>> out(queues_.size());
  for (std::size_t i = 0; i < queues_.size(); ++i) {
    out[i].assign(std::make_move_iterator(queues_[i].begin()), std::make_move_iterator(queues_[i].end()));
    queues_[i].clear();
  }
  not_full_.notify_all();
  return out;
}

void IngestQueues::close() {
  std::lock_guard lk(mu_);
  closed_ = true;
  not_full_.notify_all();
  not_empty_.notify_all();
}

std::size_t IngestQueues::depth(std::size_t stream) const {
  std::lock_guard lk(mu_);
  return queues_.at(stream).size();
}

bool IngestQueues::empty() const {
  std::lock_guard lk(mu_);
  return std::all_of(queues_.begin(), queues_.end(), [](const auto& q) { return q.empty(); });
}

// ---- service internals

struct RecorderService::Link {
  Link(StreamInfo i, std::size_t idx, wire::LineConnection c, const RecorderConfig& cfg)
      : info(std::move(i)),
        index(idx),
        conn(std::move(c)),
        ingest(info, cfg.timesync_period_s, cfg.timesync_timeout_s) {}

  StreamInfo info;
  std::size_t index;
  wire::LineConnection conn;
  StreamIngest ingest;
  std::thread thread;

  std::mutex mu;
  std::deque<double> arrivals;
  std::uint64_t received = 0;
  bool connected = true;
  std::string error;
};

struct RecorderService::Active {
  SessionMeta meta;
  fs::path container;
  fs::path manifest;
  double started_at = 0.0;
  std::vector<StreamInfo> streams;
  std::size_t control_index = 0;

  std::mutex sink_mu;
  std::unique_ptr<ContainerSink> sink;
  std::unique_ptr<IngestQueues> queues;
  std::vector<std::unique_ptr<Link>> links;
  std::thread writer;
  std::atomic<bool> stop_readers{false};
  std::atomic<bool> readers_done{false};
  std::string writer_error;

  std::uint64_t notes = 0;
  std::uint64_t answers = 0;
};

RecorderService::RecorderService(RecorderConfig config)
    : config_(std::move(config)), epoch_(std::chrono::steady_clock::now()) {
  char host[256] = {};
  ::gethostname(host, sizeof host - 1);
  control_ = {fmt::format("control@{}-{}", host, ::getpid()),
              sim::kControlStreamName,
              StreamType::control,
              0.0,
              2,
              "localhost",
              0};
  known_ = {control_};
}

RecorderService::~RecorderService() {
  try {
    if (phase_ == Phase::recording) stop_recording();
  } catch (const std::exception&) {
  }
}

double RecorderService::world_now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void RecorderService::notify(const json& event) {
  std::vector<Listener> ls;
  {
    std::lock_guard lk(listeners_mu_);
    for (const auto& [id, l] : listeners_) ls.push_back(l);
  }
  for (const auto& l : ls) l(event);
}

int RecorderService::add_listener(Listener l) {
  std::lock_guard lk(listeners_mu_);
  listeners_[next_listener_] = std::move(l);
  return next_listener_++;
}

void RecorderService::remove_listener(int id) {
  std::lock_guard lk(listeners_mu_);
  listeners_.erase(id);
}

void RecorderService::set_phase(Phase p) {
  phase_ = p;
  notify({{"type", "phase"}, {"phase", std::string(to_string(p))}});
}

std::vector<StreamInfo> RecorderService::refresh_streams() {
  std::unique_lock tlk(transition_, std::try_to_lock);
  if (!tlk) throw StateConflict("another state transition is in progress");
  if (phase_ == Phase::recording || phase_ == Phase::stopping) {
    throw StateConflict("cannot refresh streams while recording");
  }
  auto found = wire::discover_streams(config_.discovery_timeout, config_.discovery_port);
  set_known_streams(std::move(found));
  return streams();
}

void RecorderService::set_known_streams(std::vector<StreamInfo> found) {
  found.push_back(control_);
  auto list = wire::dedupe_streams(std::move(found));
  bool disarm = false;
  {
    std::lock_guard lk(mu_);
    known_ = std::move(list);
    std::erase_if(selected_, [&](const std::string& uid) {
      return std::none_of(known_.begin(), known_.end(), [&](const StreamInfo& s) { return s.uid == uid; });
    });
    disarm = selected_.empty() && phase_ == Phase::armed;
  }
  if (disarm) set_phase(Phase::idle);
}

std::vector<StreamInfo> RecorderService::streams() const {
  std::lock_guard lk(mu_);
  return known_;
}

void RecorderService::select(const std::vector<std::string>& uids) {
  std::unique_lock tlk(transition_, std::try_to_lock);
  if (!tlk) throw StateConflict("another state transition is in progress");
  if (phase_ != Phase::idle && phase_ != Phase::armed) throw StateConflict("cannot change selection while recording");
  {
    std::lock_guard lk(mu_);
    for (const auto& uid : uids) {
      if (std::none_of(known_.begin(), known_.end(), [&](const StreamInfo& s) { return s.uid == uid; })) {
        throw RecorderError("unknown stream " + uid);
      }
    }
    selected_ = uids;
  }
  set_phase(uids.empty() ? Phase::idle : Phase::armed);
}

namespace {

std::string sanitize(const std::string& s) {
  std::string out;
  for (const char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    out.push_back(ok ? c : '-');
  }
  return out;
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return fmt::format("{}.{:03d}Z", buf, static_cast<int>(ms));
}

fs::path unique_container(const fs::path& root, const SessionMeta& m) {
  const std::string base = fmt::format("{}_{}_{}", sanitize(m.subject_id), sanitize(m.session_name), utc_stamp());
  fs::path p = root / (base + ".xdf");
  for (int i = 1; fs::exists(p); ++i) p = root / fmt::format("{}-{}.xdf", base, i);
  return p;
}

}  // namespace

json RecorderService::start_recording(const std::vector<std::string>& selection, SessionMeta meta) {
  std::unique_lock tlk(transition_, std::try_to_lock);
  if (!tlk) throw StateConflict("another state transition is in progress");
  if (phase_ != Phase::idle && phase_ != Phase::armed) {
    throw StateConflict(fmt::format("cannot start while {}", to_string(phase_.load())));
  }
  if (selection.empty()) throw RecorderError("no streams selected");
  if (meta.subject_id.empty()) throw RecorderError("subject_id is required");
  if (meta.session_name.empty()) throw RecorderError("session_name is required");
  if (meta.study_root.empty()) meta.study_root = config_.study_root;
  std::error_code ec;
  if (meta.study_root.empty() || !fs::is_directory(meta.study_root, ec) ||
      ::access(meta.study_root.c_str(), W_OK) != 0) {
    throw RecorderError(fmt::format("study root '{}' is not a writable directory", meta.study_root.string()));
  }

  std::vector<StreamInfo> devices;
  {
    std::lock_guard lk(mu_);
    for (const auto& uid : selection) {
      const auto it = std::find_if(known_.begin(), known_.end(), [&](const StreamInfo& s) { return s.uid == uid; });
      if (it == known_.end()) throw RecorderError("unknown stream " + uid);
      if (it->uid == control_.uid) continue;
      if (std::any_of(devices.begin(), devices.end(), [&](const StreamInfo& d) { return d.uid == uid; })) continue;
      devices.push_back(*it);
    }
    if (!meta.trial_plan) meta.trial_plan = plan_;
    selected_ = selection;
  }
  set_phase(Phase::armed);

  auto active = std::make_unique<Active>();
  active->meta = meta;
  std::vector<wire::LineConnection> conns;
  for (const auto& d : devices) {
    try {
      conns.push_back(wire::LineConnection::connect(d.host, d.port, config_.connect_timeout));
    } catch (const std::exception& e) {
      set_phase(Phase::armed);
      throw RecorderError(fmt::format("stream {} ({}) unreachable: {}", d.name, d.uid, e.what()));
    }
  }

  active->streams = devices;
  active->control_index = devices.size();
  active->streams.push_back(control_);
  active->container = unique_container(meta.study_root, meta);
  active->manifest = fs::path(active->container).replace_extension(".manifest.json");
  active->started_at = world_now();

  json metadata = to_json(meta);
  metadata["recorder"] = fmt::format("pesao-recorderd {}", PESAO_VERSION);
  metadata["started_at_world_s"] = active->started_at;
  metadata["started_at_utc"] = utc_stamp();
  try {
    active->sink = std::make_unique<ContainerSink>(active->container, metadata, active->streams,
                                                   config_.boundary_period_s);
  } catch (const std::exception& e) {
    std::error_code rm;
    fs::remove(active->container, rm);
    throw RecorderError(std::string("cannot create container: ") + e.what());
  }

  active->queues = std::make_unique<IngestQueues>(active->streams.size(), config_.queue_capacity);
  for (std::size_t i = 0; i < devices.size(); ++i) {
    active->links.push_back(std::make_unique<Link>(devices[i], i, std::move(conns[i]), config_));
  }

  json stub;
  {
    std::lock_guard lk(mu_);
    active_ = std::move(active);
    Active& a = *active_;
    a.writer = std::thread([this] { writer_loop(); });
    for (auto& l : a.links) {
      Link* lp = l.get();
      lp->thread = std::thread([this, lp] { reader_loop(*lp); });
    }
    json streams = json::array();
    for (std::size_t i = 0; i < a.streams.size(); ++i) {
      streams.push_back({{"uid", a.streams[i].uid}, {"name", a.streams[i].name}, {"stream_id", i + 1}});
    }
    stub = {{"container", a.container.string()},
            {"manifest", a.manifest.string()},
            {"started_at", a.started_at},
            {"session", to_json(a.meta)},
            {"streams", streams}};
  }
  set_phase(Phase::recording);
  return stub;
}

void RecorderService::reader_loop(Link& link) {
  Active& a = *active_;
  try {
    while (!a.stop_readers) {
      if (auto req = link.ingest.poll_timesync(WorldTime{world_now()})) link.conn.write_line(*req);
      auto line = link.conn.read_line(std::chrono::milliseconds(20));
      if (!line) continue;
      const double arrival = world_now();
      auto item = link.ingest.on_line(*line, WorldTime{arrival});
      if (!item) continue;
      if (std::holds_alternative<SampleItem>(*item)) {
        std::lock_guard lk(link.mu);
        ++link.received;
        link.arrivals.push_back(arrival);
        while (!link.arrivals.empty() && link.arrivals.front() < arrival - config_.rate_window_s) {
          link.arrivals.pop_front();
        }
      }
      if (!a.queues->push(link.index, std::move(*item))) break;
    }
  } catch (const std::exception& e) {
    std::lock_guard lk(link.mu);
    link.connected = false;
    link.error = e.what();
  }
}

void RecorderService::writer_loop() {
  Active& a = *active_;
  // The Control stream shares the recorder clock; one offset goes in up front
  // so even a very short session carries it.
  double next_control_sync = world_now();
  {
    std::lock_guard lk(a.sink_mu);
    a.sink->apply(a.control_index, OffsetItem{next_control_sync, 0.0});
    next_control_sync += config_.timesync_period_s;
  }
  while (true) {
    const bool finishing = a.readers_done.load();
    auto batch = a.queues->pop_all(std::chrono::milliseconds(50));
    const double now = world_now();
    std::lock_guard lk(a.sink_mu);
    try {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (!batch[i].empty()) a.sink->apply(i, batch[i]);
      }
      if (now >= next_control_sync && !finishing) {
        a.sink->apply(a.control_index, OffsetItem{now, 0.0});
        next_control_sync += config_.timesync_period_s;
        if (next_control_sync <= now) next_control_sync = now + config_.timesync_period_s;
      }
      a.sink->tick(WorldTime{now});
    } catch (const std::exception& e) {
      if (a.writer_error.empty()) a.writer_error = e.what();
    }
    if (finishing && a.queues->empty()) break;
  }
}

MarkerEvent RecorderService::post_marker(MarkerKind kind, std::string payload) {
  MarkerEvent e;
  {
    std::lock_guard lk(mu_);
    if (phase_ != Phase::recording || !active_) throw StateConflict("not recording");
    e = MarkerEvent{DeviceTime{world_now()}, kind, std::move(payload)};
    try {
      e.validate();
    } catch (const std::invalid_argument& err) {
      throw RecorderError(err.what());
    }
    const auto sample = wire::marker_sample(e);
    active_->queues->push(active_->control_index,
                          SampleItem{{e.t.seconds, std::get<std::vector<std::string>>(sample.values)}});
    if (kind == MarkerKind::note) ++active_->notes;
    if (kind == MarkerKind::answer) ++active_->answers;
  }
  notify({{"type", "ack"},
          {"kind", std::string(to_string(kind))},
          {"t", e.t.seconds},
          {"payload", e.payload}});
  return e;
}

MarkerEvent RecorderService::post_note(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw RecorderError("note text must not be empty");
  return post_marker(MarkerKind::note, text);
}

namespace {

std::string trial_condition(const std::optional<sim::TrialPlan>& plan, int index) {
  if (!plan) throw RecorderError("no trial plan");
  if (index < 0 || static_cast<std::size_t>(index) >= plan->order.size()) {
    throw RecorderError(fmt::format("trial index {} out of range (plan has {} trials)", index, plan->order.size()));
  }
  return plan->order[static_cast<std::size_t>(index)];
}

}  // namespace

MarkerEvent RecorderService::post_answer(int trial_index, const std::string& answer) {
  if (phase_ != Phase::recording) throw StateConflict("not recording");
  const std::string condition = trial_condition(trials(), trial_index);
  json payload{{"trial_index", trial_index}, {"condition", condition}, {"answer", answer}};
  return post_marker(MarkerKind::answer, payload.dump());
}

MarkerEvent RecorderService::mark_trial(MarkerKind kind, int trial_index) {
  if (kind != MarkerKind::trial_start && kind != MarkerKind::trial_end) {
    throw RecorderError("trial marker must be trial_start or trial_end");
  }
  if (phase_ != Phase::recording) throw StateConflict("not recording");
  const std::string condition = trial_condition(trials(), trial_index);
  json payload{{"trial_index", trial_index}, {"condition", condition}};
  return post_marker(kind, payload.dump());
}

sim::TrialPlan RecorderService::generate_trials(std::uint64_t seed, const std::vector<std::string>& conditions,
                                                int repetitions) {
  if (phase_ == Phase::recording || phase_ == Phase::stopping) {
    throw StateConflict("cannot regenerate trials while recording");
  }
  sim::TrialPlan plan;
  try {
    plan = sim::generate_trials(seed, conditions, repetitions);
  } catch (const std::invalid_argument& e) {
    throw RecorderError(e.what());
  }
  std::lock_guard lk(mu_);
  plan_ = plan;
  return plan;
}

std::optional<sim::TrialPlan> RecorderService::trials() const {
  std::lock_guard lk(mu_);
  if (active_ && active_->meta.trial_plan) return active_->meta.trial_plan;
  return plan_;
}

json RecorderService::stop_recording() {
  std::unique_lock tlk(transition_, std::try_to_lock);
  if (!tlk) throw StateConflict("another state transition is in progress");
  if (phase_ != Phase::recording) throw StateConflict("not recording");
  set_phase(Phase::stopping);
  json manifest = finish_recording();
  {
    std::lock_guard lk(mu_);
    active_.reset();
    last_manifest_ = manifest;
  }
  set_phase(Phase::idle);
  notify({{"type", "manifest"}, {"manifest", manifest}});
  return manifest;
}

json RecorderService::finish_recording() {
  Active& a = *active_;
  a.stop_readers = true;
  for (auto& l : a.links) {
    if (l->thread.joinable()) l->thread.join();
  }
  a.readers_done = true;
  if (a.writer.joinable()) a.writer.join();
  const double stopped_at = world_now();

  bool suspect = !a.writer_error.empty();
  std::string error = a.writer_error;
  try {
    a.sink->finalize();
  } catch (const std::exception& e) {
    suspect = true;
    if (error.empty()) error = e.what();
  }
  for (auto& l : a.links) l->conn.shutdown();

  json streams = json::array();
  std::optional<xdf::Recording> rec;
  try {
    rec = xdf::read_recording(a.container);
  } catch (const std::exception& e) {
    suspect = true;
    if (error.empty()) error = std::string("verification failed: ") + e.what();
  }
  const auto footer_of = [&](std::uint32_t id) -> std::optional<std::uint64_t> {
    if (!rec) return std::nullopt;
    const auto* s = rec->find_by_id(id);
    if (s == nullptr || !s->footer) return std::nullopt;
    return s->footer->sample_count;
  };
  for (std::size_t i = 0; i < a.streams.size(); ++i) {
    const auto& c = a.sink->counts(i);
    const auto footer = footer_of(a.sink->stream_id(i));
    if (!footer || *footer != c.samples) {
      suspect = true;
      if (error.empty()) error = fmt::format("footer count mismatch on stream {}", a.streams[i].name);
    }
    json entry{{"uid", a.streams[i].uid},
               {"name", a.streams[i].name},
               {"type", std::string(to_string(a.streams[i].type))},
               {"stream_id", a.sink->stream_id(i)},
               {"samples", c.samples},
               {"footer_samples", footer ? json(*footer) : json(nullptr)},
               {"clock_offsets", c.clock_offsets},
               {"drops", c.drops}};
    if (const auto pts = a.sink->pts_stream_id(i)) {
      entry["pts_stream_id"] = *pts;
      entry["pts_samples"] = c.pts;
      const auto pf = footer_of(*pts);
      if (!pf || *pf != c.pts) {
        suspect = true;
        if (error.empty()) error = fmt::format("footer count mismatch on {}-pts", a.streams[i].name);
      }
    }
    streams.push_back(entry);
  }

  json manifest{{"container", a.container.filename().string()},
                {"container_path", fs::absolute(a.container).string()},
                {"session", to_json(a.meta)},
                {"started_at", a.started_at},
                {"stopped_at", stopped_at},
                {"streams", streams},
                {"notes", a.notes},
                {"answers", a.answers},
                {"checksums", {{a.container.filename().string(), util::sha256_file(a.container)}}},
                {"suspect", suspect},
                {"error", error}};
  util::write_file(a.manifest, manifest.dump(2) + "\n");
  manifest["manifest_path"] = fs::absolute(a.manifest).string();
  return manifest;
}

json RecorderService::status() const {
  std::lock_guard lk(mu_);
  json known = json::array();
  for (const auto& s : known_) known.push_back(to_json(s));
  json out{{"phase", std::string(to_string(phase_.load()))},
           {"world_time", world_now()},
           {"streams", known},
           {"selected", selected_},
           {"trial_plan", plan_ ? sim::to_json(*plan_) : json(nullptr)},
           {"last_manifest", last_manifest_ ? *last_manifest_ : json(nullptr)}};
  if (!active_) {
    out["session"] = nullptr;
    out["recording"] = nullptr;
    return out;
  }
  Active& a = *active_;
  const double now = world_now();
  json per = json::array();
  std::lock_guard slk(a.sink_mu);
  for (std::size_t i = 0; i < a.streams.size(); ++i) {
    const auto& c = a.sink->counts(i);
    json e{{"uid", a.streams[i].uid},
           {"name", a.streams[i].name},
           {"samples", c.samples},
           {"clock_offsets", c.clock_offsets},
           {"drops", c.drops},
           {"queue_depth", a.queues->depth(i)},
           {"rate_hz", 0.0},
           {"connected", true}};
    if (i < a.links.size()) {
      Link& l = *a.links[i];
      std::lock_guard llk(l.mu);
      const auto n = std::count_if(l.arrivals.begin(), l.arrivals.end(),
                                   [&](double t) { return t > now - config_.rate_window_s; });
      e["rate_hz"] = static_cast<double>(n) / config_.rate_window_s;
      e["received"] = l.received;
      e["connected"] = l.connected;
      if (!l.error.empty()) e["error"] = l.error;
    }
    per.push_back(e);
  }
  out["session"] = to_json(a.meta);
  out["container"] = a.container.string();
  out["started_at"] = a.started_at;
  out["recording"] = {{"streams", per}, {"notes", a.notes}, {"answers", a.answers}};
  return out;
}

}  // namespace pesao::recorder
