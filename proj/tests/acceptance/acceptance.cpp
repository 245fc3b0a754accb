// End-to-end acceptance checks. Prints one PASS/FAIL line per requirement and
// exits nonzero when any of them fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <omp.h>

#include "pesao/eval/eval.hpp"
#include "pesao/proc/pipeline.hpp"
#include "pesao/recorder/service.hpp"
#include "pesao/recorder/virtual_session.hpp"
#include "pesao/sim/server.hpp"
#include "pesao/sim/simulators.hpp"
#include "pesao/util/io.hpp"
#include "support.hpp"

using namespace pesao;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Session {
  fs::path xdf, native, truth;
};

Session record(const sim::Scenario& s, const fs::path& dir, std::vector<std::pair<double, std::string>> notes = {}) {
  fs::create_directories(dir);
  Session out{dir / "session.xdf", dir / "livedata.ndjson.gz", dir / "truth.tsv"};
  recorder::VirtualSessionOptions o;
  o.container = out.xdf;
  o.native_log = out.native;
  o.ground_truth = out.truth;
  o.notes = std::move(notes);
  recorder::run_virtual_session(s, o);
  return out;
}

proc::ProcessOptions options_for(const sim::Scenario& s) {
  proc::ProcessOptions o;
  o.calibration = {s.calibration.rotation, s.calibration.translation};
  return o;
}

proc::SyncedDataset process(const sim::Scenario& s, const Session& ses) {
  const auto rec = xdf::read_recording(ses.xdf);
  const auto log = proc::load_native_log(ses.native);
  return proc::build_synced_dataset(rec, log, proc::build_clock_maps(rec, log), options_for(s));
}

std::map<std::int64_t, sim::GroundTruthRow> gaze_truth(const fs::path& p) {
  std::map<std::int64_t, sim::GroundTruthRow> out;
  for (auto& row : sim::read_ground_truth(p)) {
    if (row.source == "gaze") out[row.native_ts_us] = row;
  }
  return out;
}

// ---- checks

Outcome sync_accuracy(const fs::path& dir) {
  const auto s = support::sync_scenario();
  const auto ses = record(s, dir);
  const auto rec = xdf::read_recording(ses.xdf);
  const auto maps = proc::build_clock_maps(rec, proc::load_native_log(ses.native));
  // k-th sample of a stream was taken at true time k / rate
  double sq = 0.0, worst = 0.0;
  std::size_t n = 0;
  const auto score = [&](const char* name, double rate) {
    const auto& m = maps.streams.at(name);
    const auto& samples = rec.find_by_name(name)->samples;
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const double err = m.apply(DeviceTime{samples[k].timestamp}).seconds - static_cast<double>(k) / rate;
      sq += err * err;
      worst = std::max(worst, std::abs(err));
      ++n;
    }
    return samples.size();
  };
  const auto gaze = score("TobiiPTS", s.gaze_hz);
  const auto mocap = score("OptiTrack", s.mocap_hz);
  const double rms = std::sqrt(sq / static_cast<double>(n));
  const std::size_t offsets = rec.find_by_name("TobiiPTS")->clock_offsets.size();
  return {gaze == 6000 && mocap == 7200 && rms <= 50e-6 && worst <= 200e-6,
          fmt::format("rms {:.2f} us, max {:.2f} us over {} samples, {} clock offsets", rms * 1e6, worst * 1e6, n,
                      offsets)};
}

Outcome zero_loss(const fs::path& dir) {
  const auto s = support::zero_loss_scenario(60.0);
  std::vector<std::unique_ptr<sim::SimServer>> servers;
  const auto opts = [&](const std::string& uid) {
    sim::ServerOptions o;
    o.accelerated = true;
    o.announce = false;
    o.uid = uid;
    o.announce_host = "127.0.0.1";
    o.link = s.link;
    return o;
  };
  servers.push_back(std::make_unique<sim::SimServer>(sim::make_mocap_source(s, 3), opts("zl-mocap")));
  servers.push_back(std::make_unique<sim::SimServer>(sim::make_gaze_source(s, 3, std::nullopt), opts("zl-gaze")));
  servers.push_back(std::make_unique<sim::SimServer>(sim::make_light_source(s), opts("zl-light")));
  for (auto& srv : servers) srv->start();

  fs::create_directories(dir);
  recorder::RecorderConfig cfg;
  cfg.study_root = dir;
  recorder::RecorderService svc(cfg);
  std::vector<StreamInfo> infos;
  std::vector<std::string> uids;
  for (const auto& srv : servers) {
    infos.push_back(srv->info());
    uids.push_back(srv->info().uid);
  }
  svc.set_known_streams(infos);
  uids.push_back(svc.control_stream().uid);
  recorder::SessionMeta meta;
  meta.subject_id = "ZL";
  meta.session_name = "zero_loss";
  svc.start_recording(uids, meta);
  const int notes = 5;
  for (int i = 0; i < notes; ++i) svc.post_note(fmt::format("note {}", i));

  const auto deadline = std::chrono::steady_clock::now() + 60s;
  while (std::chrono::steady_clock::now() < deadline) {
    const auto st = svc.status();
    bool drained = true;
    for (std::size_t i = 0; i < servers.size(); ++i) {
      if (!servers[i]->finished() || st["recording"]["streams"][i].value("received", 0ULL) < servers[i]->total()) {
        drained = false;
      }
    }
    if (drained) break;
    std::this_thread::sleep_for(20ms);
  }
  const auto manifest = svc.stop_recording();
  const auto rec = xdf::read_recording(manifest["container_path"].get<std::string>());

  // emission counts from the scenario itself
  const std::map<std::string, std::uint64_t> expected{
      {"OptiTrack", static_cast<std::uint64_t>(std::llround(s.duration_s * s.mocap_hz))},
      {"TobiiPTS", static_cast<std::uint64_t>(std::llround(s.duration_s * s.gaze_hz))},
      {"TobiiPTS-pts", static_cast<std::uint64_t>(std::llround(s.duration_s))},
      {"Light", s.light_schedule.size()},
      {"Control", static_cast<std::uint64_t>(notes)}};
  bool ok = true;
  std::string detail;
  for (const auto& [name, want] : expected) {
    const auto* sd = rec.find_by_name(name);
    const std::uint64_t got = sd != nullptr && sd->footer ? sd->footer->sample_count : 0;
    ok = ok && got == want && sd->samples.size() == want;
    detail += fmt::format("{} {}/{}, ", name, got, want);
  }
  std::uint64_t drops = 0;
  for (const auto& e : manifest["streams"]) drops += e["drops"].get<std::uint64_t>();
  const auto* mocap = rec.find_by_name("OptiTrack");
  // distinct tracked bodies in every recorded frame
  std::size_t bodies = 0;
  if (mocap != nullptr) {
    bodies = SIZE_MAX;
    for (const auto& smp : mocap->samples) {
      const auto f = MocapFrame::from_channels(DeviceTime{smp.timestamp}, std::get<std::vector<double>>(smp.values));
      std::set<int> ids;
      for (const auto& b : f.bodies) ids.insert(b.body_id);
      bodies = std::min(bodies, ids.size());
    }
  }
  ok = ok && drops == 0 && bodies == 10;
  return {ok, detail + fmt::format("drops {}, {} bodies", drops, bodies)};
}

Outcome xdf_round_trip(const fs::path& dir) {
  fs::create_directories(dir);
  std::mt19937_64 rng(2024);
  std::size_t exact = 0, cuts = 0, cuts_ok = 0;
  std::string first_error;
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto path = dir / "r.xdf";
    fs::remove(path);
    const auto session = support::write_random_session(path, seed);
    const auto bytes = xdf::read_bytes(path);
    const auto err = support::compare_recordings(xdf::parse_recording(bytes), session.expected);
    if (err.empty()) {
      ++exact;
    } else if (first_error.empty()) {
      first_error = fmt::format("seed {}: {}", seed, err);
    }
    // cut at and after every boundary but the final one
    for (std::size_t b = 0; b + 1 < session.boundaries.size(); ++b) {
      const auto& mark = session.boundaries[b];
      const std::uint64_t room = session.boundaries[b + 1].end_offset - mark.end_offset;
      for (const std::uint64_t extra : {std::uint64_t{0}, rng() % room}) {
        ++cuts;
        const auto rec = xdf::parse_recording(std::span<const std::uint8_t>(bytes.data(), mark.end_offset + extra));
        support::BoundaryMark seen;
        seen.streams = rec.streams.size();
        bool covers = seen.streams >= mark.streams;
        for (std::size_t k = 0; k < seen.streams; ++k) {
          seen.samples.push_back(rec.streams[k].samples.size());
          seen.clock_offsets.push_back(rec.streams[k].clock_offsets.size());
          if (k < mark.streams) {
            covers = covers && seen.samples[k] >= mark.samples[k] && seen.clock_offsets[k] >= mark.clock_offsets[k];
          }
        }
        const auto cut_err = support::compare_recordings(rec, session.expected, &seen);
        if (covers && cut_err.empty()) {
          ++cuts_ok;
        } else if (first_error.empty()) {
          first_error = fmt::format("seed {} boundary {}: {}", seed, b, covers ? cut_err : "samples lost");
        }
      }
    }
  }
  return {exact == 1000 && cuts_ok == cuts && cuts > 0,
          fmt::format("{}/1000 sessions bit-exact, {}/{} truncations keep every prior sample{}", exact, cuts_ok, cuts,
                      first_error.empty() ? "" : "; " + first_error)};
}

Outcome fusion_zero_noise(const fs::path& dir) {
  const auto s = support::fusion_scenario(0.0);
  const auto ses = record(s, dir);
  const auto ds = process(s, ses);
  const auto truth = gaze_truth(ses.truth);
  double worst = 0.0;
  std::size_t n = 0;
  for (const auto& r : ds.records) {
    if (!r.ray) return {false, fmt::format("record at {} has no ray", r.t_world)};
    worst = std::max(worst, angle_between(r.ray->dir, truth.at(r.native_ts_us).ray));
    ++n;
  }
  return {n > 0 && worst <= 1e-6, fmt::format("max angle {:.3e} rad over {} records", worst, n)};
}

Outcome fusion_noisy(const fs::path& dir, Outcome* hits_out) {
  const auto s = support::fusion_scenario(0.5);
  const auto ses = record(s, dir);
  const auto ds = process(s, ses);
  const auto truth = gaze_truth(ses.truth);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : ds.records) {
    if (!r.ray) continue;
    sum += angle_between(r.ray->dir, truth.at(r.native_ts_us).ray) * kRadToDeg;
    ++n;
  }
  const double mean = sum / static_cast<double>(std::max<std::size_t>(n, 1));

  // hit rate over records the script aims at an object
  std::vector<eval::ObjectSpec> objects;
  for (const auto& o : s.objects) objects.push_back({o.body_id, 0.15, ""});
  const auto hits = eval::gaze_object_hits(ds, objects);
  std::map<std::pair<std::size_t, int>, bool> hit;
  for (const auto& h : hits.hits) hit[{h.record, h.body_id}] = h.hit;
  std::size_t aimed = 0, got = 0;
  double dmin = 1e9, dmax = 0.0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& gt = truth.at(ds.records[i].native_ts_us);
    if (gt.object_id < 0) continue;
    ++aimed;
    const auto it = hit.find({i, gt.object_id});
    got += it != hit.end() && it->second ? 1 : 0;
    for (const auto& o : ds.records[i].objects) {
      if (o.body_id != gt.object_id) continue;
      const double d = (o.pose.position - gt.eye).norm();
      dmin = std::min(dmin, d);
      dmax = std::max(dmax, d);
    }
  }
  const double rate = aimed > 0 ? static_cast<double>(got) / static_cast<double>(aimed) : 0.0;
  *hits_out = {aimed > 0 && rate >= 0.95 && dmin >= 1.0 && dmax <= 2.0,
               fmt::format("hit rate {:.2f}% ({}/{}), radius 0.15 m, objects {:.2f}-{:.2f} m away", rate * 100.0, got,
                           aimed, dmin, dmax)};
  return {n > 0 && mean <= 1.5, fmt::format("mean angle {:.3f} deg over {} records", mean, n)};
}

Outcome ivt_segments(const fs::path& dir) {
  const auto s = support::ivt_scenario();
  const auto ds = process(s, record(s, dir));
  std::vector<proc::Segment> fix;
  for (const auto& seg : ds.segments) {
    if (seg.label == proc::Label::fixation) fix.push_back(seg);
  }
  std::vector<const sim::GazeSegment*> script;
  for (const auto& g : s.gaze_script) {
    if (g.kind == sim::GazeKind::target) script.push_back(&g);
  }
  const double dt = 1.0 / s.gaze_hz;
  double worst_edge = 0.0, worst_dur = 0.0;
  if (fix.size() == script.size()) {
    for (std::size_t i = 0; i < fix.size(); ++i) {
      worst_edge = std::max({worst_edge, std::abs(fix[i].t_start - script[i]->t_start),
                             std::abs(fix[i].t_end - script[i]->t_end)});
      worst_dur = std::max(worst_dur, std::abs(fix[i].duration_ms() - (script[i]->t_end - script[i]->t_start) * 1e3));
    }
  }
  std::size_t saccades = 0;
  for (const auto& g : s.gaze_script) saccades += g.kind == sim::GazeKind::saccade ? 1 : 0;
  const bool ok = script.size() == 12 && saccades == 8 && fix.size() == 12 && worst_edge <= dt + 1e-9 &&
                  worst_dur <= 10.0 + 1e-6;
  return {ok, fmt::format("{} fixation segments for {} scripted ({} saccades), worst edge {:.1f} ms, worst duration "
                          "error {:.1f} ms",
                          fix.size(), script.size(), saccades, worst_edge * 1e3, worst_dur)};
}

Outcome table1_limits() {
  std::string detail;
  bool ok = true;
  const auto rejected = [&](std::function<void(sim::Scenario&)> edit, const std::string& cite) {
    auto s = support::basic_scenario(2.0);
    edit(s);
    try {
      sim::validate_scenario(s);
    } catch (const sim::ScenarioError& e) {
      return std::string(e.what()).find(cite) != std::string::npos;
    }
    return false;
  };
  int rejections = 0;
  for (const double hz : {120.5, 121.0, 240.0}) rejections += rejected([&](auto& s) { s.mocap_hz = hz; }, "120 Hz cap");
  for (const double hz : {25.0, 60.0, 75.0, 120.0}) rejections += rejected([&](auto& s) { s.gaze_hz = hz; }, "50 or 100 Hz");
  int accepted = 0;
  for (const double hz : {60.0, 100.0, 120.0}) accepted += rejected([&](auto& s) { s.mocap_hz = hz; }, "") ? 0 : 1;
  for (const double hz : {50.0, 100.0}) accepted += rejected([&](auto& s) { s.gaze_hz = hz; }, "") ? 0 : 1;
  ok = rejections == 7 && accepted == 5;
  detail += fmt::format("{}/7 out-of-range rates rejected citing the cap, {}/5 valid rates accepted; ", rejections,
                        accepted);

  const std::pair<sim::LightState, sim::LightState> cases[] = {
      {{9000.0, 2000.0}, {7300.0, 3200.0}}, {{-10.0, 9000.0}, {0.0, 5600.0}},
      {{7300.0, 3200.0}, {7300.0, 3200.0}}, {{0.0, 5600.0}, {0.0, 5600.0}},
      {{500.0, 4000.0}, {500.0, 4000.0}}};
  int clamped = 0;
  for (const auto& [in, want] : cases) clamped += sim::clamp_light(in) == want ? 1 : 0;
  // and through the light simulator's marker payloads
  auto s = support::basic_scenario(2.0);
  s.light_schedule = {{0.0, 1e5, 1000.0}, {1.0, -3.0, 1e4}};
  sim::LightSim light(s);
  int payloads = 0;
  const std::pair<double, double> want[] = {{7300.0, 3200.0}, {0.0, 5600.0}};
  for (const auto& [lux, k] : want) {
    const auto p = nlohmann::json::parse(light.next().event.payload);
    payloads += p["lux"].get<double>() == lux && p["kelvin"].get<double>() == k ? 1 : 0;
  }
  ok = ok && clamped == 5 && payloads == 2;
  detail += fmt::format("{}/5 light states clamped to [0, 7300] lux and [3200, 5600] K, {}/2 marker payloads", clamped,
                        payloads);
  return {ok, detail};
}

Outcome determinism(const fs::path& dir) {
  auto s = support::fusion_scenario(0.5);
  s.duration_s = 20.0;
  s.light_schedule = {{2.0, 300.0, 4000.0}, {9.0, 800.0, 5000.0}};
  const auto ses = record(s, dir / "rec", {{4.0, "note"}});
  util::write_file(dir / "objects.toml", "[[objects]]\nbody_id = 2\n[[objects]]\nbody_id = 3\n[[objects]]\nbody_id = 4\n");
  const auto objects = eval::load_objects(dir / "objects.toml");

  const auto run = [&](const std::string& tag, int threads) {
    omp_set_num_threads(threads);
    const proc::ProcessInputs in{ses.xdf, ses.native, std::nullopt, std::nullopt};
    proc::SyncedDataset ds;
    proc::run_process(in, options_for(s), dir / tag / "synced", &ds);
    eval::export_artifacts(proc::import_synced(dir / tag / "synced"), objects, dir / tag / "eval", {}, 50);
  };
  run("a", 1);
  run("b", 4);
  omp_set_num_threads(1);
  std::size_t files = 0, same = 0;
  for (const auto& sub : {"synced", "eval"}) {
    for (const auto& e : fs::directory_iterator(dir / "a" / sub)) {
      ++files;
      const auto other = dir / "b" / sub / e.path().filename();
      same += fs::exists(other) && util::read_file(e.path()) == util::read_file(other) ? 1 : 0;
    }
  }
  return {files == 8 && same == files, fmt::format("{}/{} output files byte-identical across two runs", same, files)};
}

}  // namespace

int main() {
  support::TempDir dir("pesao-acceptance");
  int failures = 0;
  const auto report = [&](const char* name, double limit_s, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && (limit_s <= 0.0 || secs < limit_s);
    failures += pass ? 0 : 1;
    const auto limit = limit_s > 0.0 ? fmt::format(" (limit {:.0f} s)", limit_s) : std::string();
    std::cout << fmt::format("{} {}: {}; runtime {:.2f} s{}", pass ? "PASS" : "FAIL", name, o.detail, secs, limit)
              << std::endl;
  };

  report("clock sync, 37.5 s offset +50 ppm drift 500+-100 us delay", 10.0,
         [&] { return sync_accuracy(dir / "sync"); });
  report("zero loss, 10 bodies at 120 Hz + gaze 100 Hz + markers for 60 s", 30.0,
         [&] { return zero_loss(dir / "zero_loss"); });
  report("container round trip, 1000 random sessions + truncation", 60.0,
         [&] { return xdf_round_trip(dir / "xdf"); });
  report("fusion without noise", 0.0, [&] { return fusion_zero_noise(dir / "fusion0"); });
  Outcome hit_rate;
  report("fusion with 0.5 deg gaze noise", 0.0, [&] { return fusion_noisy(dir / "fusion05", &hit_rate); });
  report("object hits", 0.0, [&] { return hit_rate; });
  report("I-VT on 12 fixations and 8 saccades", 0.0, [&] { return ivt_segments(dir / "ivt"); });
  report("hardware limits", 0.0, table1_limits);
  report("processor and evaluator determinism", 0.0, [&] { return determinism(dir / "det"); });

  std::cout << (failures == 0 ? "all acceptance checks passed" : fmt::format("{} acceptance check(s) failed", failures))
            << std::endl;
  return failures == 0 ? 0 : 1;
}
