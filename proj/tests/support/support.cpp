#include "support.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <random>
#include <stdexcept>

#include <unistd.h>

namespace pesao::support {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Quaternion level_head(double yaw_deg) {
  const Quaternion base{0.5, 0.5, 0.5, 0.5};
  const double a = yaw_deg * std::numbers::pi / 180.0;
  const Quaternion yaw{std::cos(a / 2.0), 0.0, 0.0, std::sin(a / 2.0)};
  return (yaw * base).normalized();
}

namespace {

sim::Waypoint wp(double t, Vec3 p, Quaternion q) {
  sim::Waypoint w;
  w.t = t;
  w.pose.position = p;
  w.pose.orientation = q;
  w.pose.t = t;
  return w;
}

sim::GazeSegment target(double t0, double t1, Vec3 p) {
  return {t0, t1, sim::GazeKind::target, p, 0};
}
sim::GazeSegment object(double t0, double t1, int id) {
  return {t0, t1, sim::GazeKind::object, {}, id};
}
sim::GazeSegment saccade(double t0, double t1) {
  return {t0, t1, sim::GazeKind::saccade, {}, 0};
}
sim::GazeSegment blink(double t0, double t1) {
  return {t0, t1, sim::GazeKind::blink, {}, 0};
}

}  // namespace

sim::Scenario basic_scenario(double duration_s) {
  sim::Scenario s;
  s.duration_s = duration_s;
  s.seed = 11;
  s.head_waypoints = {wp(0.0, {-1.0, 0.0, 1.6}, level_head())};
  s.gaze_script = {target(0.0, duration_s, {1.0, 0.0, 1.6})};
  s.objects = {{2, {1.0, 0.0, 1.0}, 0.15, {}}};
  s.light_schedule = {{0.0, 500.0, 4000.0}};
  return s;
}

sim::Scenario sync_scenario() {
  auto s = basic_scenario(60.0);
  s.gaze_clock = {37.5, 50.0};
  s.mocap_clock = {2.25, -20.0};
  s.light_clock = {11.0, 5.0};
  s.link = {500e-6, 100e-6, 0.0};
  return s;
}

sim::Scenario ivt_scenario() {
  sim::Scenario s;
  s.seed = 5;
  s.head_waypoints = {wp(0.0, {-1.0, 0.0, 1.5}, level_head())};
  // Targets on a 2 m arc, far enough apart that every saccade is > 10 degrees.
  const auto at = [](double yaw_deg, double z) {
    const double a = yaw_deg * std::numbers::pi / 180.0;
    return Vec3{-1.0 + 2.0 * std::cos(a), 2.0 * std::sin(a), z};
  };
  const std::array<double, 12> yaw{-30, 0, 30, 25, -5, -35, -20, 10, 40, 30, 0, -30};
  const std::array<double, 12> hold{0.8, 1.2, 0.6, 1.0, 0.7, 0.9, 1.1, 0.5, 0.8, 0.6, 1.0, 0.9};
  double t = 0.0;
  for (std::size_t i = 0; i < 12; ++i) {
    s.gaze_script.push_back(target(t, t + hold[i], at(yaw[i], i % 2 == 0 ? 1.5 : 1.3)));
    t += hold[i];
    if (i == 11) break;
    if (i % 3 == 2) {
      s.gaze_script.push_back(blink(t, t + 0.15));
      t += 0.15;
    } else {
      s.gaze_script.push_back(saccade(t, t + 0.05));
      t += 0.05;
    }
  }
  s.duration_s = t;
  s.light_schedule = {{0.0, 500.0, 4000.0}};
  return s;
}

sim::Scenario fusion_scenario(double gaze_noise_deg) {
  sim::Scenario s;
  s.duration_s = 30.0;
  s.seed = 23;
  s.noise.gaze_angular_deg = gaze_noise_deg;
  s.gaze_clock = {37.5, 50.0};
  s.mocap_clock = {2.25, -20.0};
  s.link = {500e-6, 0.0, 0.0};
  // a non-trivial calibration exercises the whole transform chain
  s.calibration.rotation = Quaternion::from_axis_angle({0.2, 1.0, 0.1}, 0.05);
  s.calibration.translation = {0.01, -0.02, 0.03};
  s.head_waypoints = {wp(0.0, {-1.0, -0.3, 1.6}, level_head(-10.0)), wp(10.0, {-0.8, 0.0, 1.65}, level_head(15.0)),
                      wp(20.0, {-0.6, 0.3, 1.6}, level_head(35.0)), wp(30.0, {-0.7, 0.1, 1.55}, level_head(0.0))};
  s.objects = {{2, {0.8, -0.6, 1.0}, 0.15, {}},
               {3, {0.6, 0.5, 1.2}, 0.15, {}},
               {4, {0.3, 0.9, 1.4}, 0.15, {wp(0.0, {0.3, 0.9, 1.4}, {}), wp(30.0, {0.5, 1.2, 1.1}, {})}}};
  s.gaze_script = {object(0.0, 6.0, 2),  saccade(6.0, 6.05),   object(6.05, 12.0, 3),  saccade(12.0, 12.05),
                   object(12.05, 18.0, 4), saccade(18.0, 18.05), object(18.05, 24.0, 2), saccade(24.0, 24.05),
                   object(24.05, 30.0, 3)};
  s.light_schedule = {{0.0, 500.0, 4000.0}};
  return s;
}

sim::Scenario zero_loss_scenario(double duration_s) {
  auto s = basic_scenario(duration_s);
  s.noise = {0.2, 0.0005, 0.1};
  s.gaze_clock = {37.5, 50.0};
  s.mocap_clock = {2.25, -20.0};
  s.light_clock = {11.0, 5.0};
  s.head_waypoints.push_back(wp(duration_s, {-0.5, 0.5, 1.6}, level_head(20.0)));
  s.objects.clear();
  for (int k = 0; k < 9; ++k) {
    const double x = -1.5 + 0.375 * k;
    s.objects.push_back({k + 2, {x, 1.5, 0.8 + 0.1 * (k % 3)}, 0.1, {}});
  }
  s.light_schedule.clear();
  for (int k = 0; k * 5.0 < duration_s; ++k) {
    s.light_schedule.push_back({k * 5.0, 300.0 + 700.0 * k, 3000.0 + 250.0 * k});
  }
  return s;
}

namespace {

std::string random_utf8(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{"a", "Z", " ", ",", "\"", "\n", "\t", "\xc3\xa9",
                                               "\xe2\x82\xac", "\xf0\x9f\x98\x80", "{", "}", "0"};
  std::uniform_int_distribution<int> len(0, 12);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::string out;
  for (int i = len(rng); i > 0; --i) out += pieces[pick(rng)];
  return out;
}

double random_double(std::mt19937_64& rng) {
  // mixes ordinary magnitudes with raw bit patterns (subnormals, extremes)
  std::uniform_int_distribution<int> mode(0, 3);
  if (mode(rng) == 0) {
    std::uint64_t b;
    do {
      b = rng();
      double v;
      std::memcpy(&v, &b, sizeof v);
      if (std::isfinite(v)) return v;
    } while (true);
  }
  return std::normal_distribution<double>(0.0, 100.0)(rng);
}

}  // namespace

RandomSession write_random_session(const fs::path& path, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  const auto uni = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  RandomSession out;
  out.expected.metadata = {{"session", "s" + std::to_string(seed)}, {"note", random_utf8(rng)}};
  xdf::XdfWriter w(path, out.expected.metadata);

  const int n_streams = uni(1, 4);
  std::vector<double> next_t;
  const auto add_stream = [&] {
    xdf::StreamHeaderInfo h;
    h.stream_id = static_cast<std::uint32_t>(out.expected.streams.size() + 1 + uni(0, 1) * 100);
    h.name = "stream" + std::to_string(out.expected.streams.size()) + random_utf8(rng);
    h.type_tag = coin(0.5) ? "gaze" : "markers";
    h.channel_format = coin(0.3) ? xdf::ChannelFormat::string : xdf::ChannelFormat::double64;
    h.channel_count = uni(1, 8);
    const std::array<double, 5> rates{0.0, 100.0, 120.0, 1000.0, 37.5};
    h.nominal_rate_hz = rates[static_cast<std::size_t>(uni(0, 4))];
    h.metadata = {{"k", uni(0, 100)}};
    w.add_stream(h);
    out.expected.streams.push_back({h, {}, {}, std::nullopt});
    next_t.push_back(std::uniform_real_distribution<double>(-1e3, 1e5)(rng));
  };
  const auto mark = [&] {
    w.append_boundary();
    BoundaryMark m;
    m.end_offset = fs::file_size(path);
    m.streams = out.expected.streams.size();
    for (const auto& s : out.expected.streams) {
      m.samples.push_back(s.samples.size());
      m.clock_offsets.push_back(s.clock_offsets.size());
    }
    out.boundaries.push_back(m);
  };

  add_stream();
  const int steps = uni(5, 40);
  for (int step = 0; step < steps; ++step) {
    if (static_cast<int>(out.expected.streams.size()) < n_streams && coin(0.2)) add_stream();
    const auto k = static_cast<std::size_t>(uni(0, static_cast<int>(out.expected.streams.size()) - 1));
    auto& sd = out.expected.streams[k];
    const int action = uni(0, 9);
    if (action < 6) {
      std::vector<xdf::XdfSample> batch(static_cast<std::size_t>(uni(0, 30)));
      const double rate = sd.header.nominal_rate_hz;
      for (auto& smp : batch) {
        // regular runs exercise deduced timestamps; jumps force explicit ones
        next_t[k] += (rate > 0.0 && !coin(0.1)) ? 1.0 / rate : std::uniform_real_distribution<double>(0.0, 2.0)(rng);
        smp.timestamp = next_t[k];
        if (sd.header.channel_format == xdf::ChannelFormat::string) {
          std::vector<std::string> v;
          for (int c = 0; c < sd.header.channel_count; ++c) v.push_back(random_utf8(rng));
          smp.values = v;
        } else {
          std::vector<double> v;
          for (int c = 0; c < sd.header.channel_count; ++c) v.push_back(random_double(rng));
          smp.values = v;
        }
      }
      w.append_samples(sd.header.stream_id, batch);
      // the reader sees deduced stamps as last explicit + i / rate, which is
      // exactly what the writer checked before dropping them
      sd.samples.insert(sd.samples.end(), batch.begin(), batch.end());
    } else if (action < 8) {
      const xdf::ClockOffset co{next_t[k] + random_double(rng) * 1e-3, random_double(rng)};
      w.append_clock_offset(sd.header.stream_id, co.collection_time, co.offset);
      sd.clock_offsets.push_back(co);
    } else {
      mark();
    }
  }
  w.finalize();
  for (auto& sd : out.expected.streams) {
    xdf::StreamFooterInfo f;
    f.sample_count = sd.samples.size();
    if (!sd.samples.empty()) {
      f.first_timestamp = sd.samples.front().timestamp;
      f.last_timestamp = sd.samples.back().timestamp;
    }
    sd.footer = f;
  }
  BoundaryMark final_mark;
  final_mark.end_offset = fs::file_size(path);
  final_mark.streams = out.expected.streams.size();
  for (const auto& sd : out.expected.streams) {
    final_mark.samples.push_back(sd.samples.size());
    final_mark.clock_offsets.push_back(sd.clock_offsets.size());
  }
  out.boundaries.push_back(final_mark);
  return out;
}

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_values(const xdf::Values& a, const xdf::Values& b) {
  if (a.index() != b.index()) return false;
  if (const auto* da = std::get_if<std::vector<double>>(&a)) {
    const auto& db = std::get<std::vector<double>>(b);
    if (da->size() != db.size()) return false;
    for (std::size_t i = 0; i < da->size(); ++i) {
      if (!same_bits((*da)[i], db[i])) return false;
    }
    return true;
  }
  return std::get<std::vector<std::string>>(a) == std::get<std::vector<std::string>>(b);
}

}  // namespace

std::string compare_recordings(const xdf::Recording& got, const xdf::Recording& want, const BoundaryMark* mark) {
  if (got.metadata != want.metadata) return "file metadata differs";
  const std::size_t n = mark ? mark->streams : want.streams.size();
  if (got.streams.size() != n) {
    return "stream count " + std::to_string(got.streams.size()) + " != " + std::to_string(n);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& g = got.streams[k];
    const auto& w = want.streams[k];
    const std::string tag = "stream " + std::to_string(k) + ": ";
    if (!(g.header == w.header)) return tag + "header differs";
    const std::size_t ns = mark ? mark->samples[k] : w.samples.size();
    const std::size_t no = mark ? mark->clock_offsets[k] : w.clock_offsets.size();
    if (g.samples.size() != ns) {
      return tag + "sample count " + std::to_string(g.samples.size()) + " != " + std::to_string(ns);
    }
    for (std::size_t i = 0; i < ns; ++i) {
      if (!same_bits(g.samples[i].timestamp, w.samples[i].timestamp)) {
        return tag + "timestamp " + std::to_string(i) + " differs";
      }
      if (!same_values(g.samples[i].values, w.samples[i].values)) return tag + "values " + std::to_string(i) + " differ";
    }
    if (g.clock_offsets.size() != no) return tag + "clock offset count differs";
    for (std::size_t i = 0; i < no; ++i) {
      if (!same_bits(g.clock_offsets[i].collection_time, w.clock_offsets[i].collection_time) ||
          !same_bits(g.clock_offsets[i].offset, w.clock_offsets[i].offset)) {
        return tag + "clock offset " + std::to_string(i) + " differs";
      }
    }
    if (!mark) {
      if (g.footer.has_value() != w.footer.has_value()) return tag + "footer presence differs";
      if (g.footer && !(*g.footer == *w.footer)) return tag + "footer differs";
    }
  }
  return {};
}

fs::path tool_path(const std::string& name) { return fs::path(PESAO_TOOLS_DIR) / name; }

std::string sha256sum(const fs::path& p) {
  const std::string cmd = "sha256sum '" + p.string() + "'";
  FILE* f = ::popen(cmd.c_str(), "r");
  if (f == nullptr) throw std::runtime_error("cannot run sha256sum");
  std::array<char, 65> buf{};
  const std::size_t n = std::fread(buf.data(), 1, 64, f);
  ::pclose(f);
  if (n != 64) throw std::runtime_error("sha256sum failed for " + p.string());
  return std::string(buf.data(), 64);
}

}  // namespace pesao::support
