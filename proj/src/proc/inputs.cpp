#include "pesao/proc/inputs.hpp"

#include <fstream>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pesao/util/io.hpp"
#include "pesao/util/toml_lite.hpp"

namespace pesao::proc {

using nlohmann::json;

std::string_view to_string(Label l) {
  switch (l) {
    case Label::fixation:
      return "Fixation";
    case Label::saccade:
      return "Saccade";
    case Label::unclassified:
      return "Unclassified";
  }
  return "Unclassified";
}

namespace {

constexpr double kUnitTolerance = 1e-6;

Vec3 vec3_of(const json& a) {
  if (!a.is_array() || a.size() != 3) throw std::invalid_argument("expected 3 numbers");
  return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

std::int64_t ts_of(const json& j) {
  const auto& v = j.at("ts");
  if (!v.is_number_integer()) throw std::invalid_argument("ts must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace

NativeGlassesLog load_native_log(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError(fmt::format("cannot read native log {}", path.string()));
  }
  NativeGlassesLog log;
  util::GzLineReader in(path);
  std::size_t line_no = 0;
  while (auto line = in.next()) {
    ++line_no;
    if (line->empty()) continue;
    const json j = json::parse(*line, nullptr, false);
    try {
      if (j.is_discarded() || !j.is_object() || !j.contains("ts")) throw std::invalid_argument("not a record");
      if (j.contains("pts")) {
        if (!j.at("pts").is_number_integer()) throw std::invalid_argument("pts must be an integer");
        log.pts.push_back({ts_of(j), j.at("pts").get<std::int64_t>()});
      } else if (j.contains("gd3")) {
        NativeGaze g;
        g.ts_us = ts_of(j);
        g.gd3 = vec3_of(j.at("gd3"));
        if (j.contains("gp")) g.gp = {j.at("gp").at(0).get<double>(), j.at("gp").at(1).get<double>()};
        g.valid = j.value("s", 0) == 0;
        if (!g.gd3.finite()) throw std::invalid_argument("gd3 not finite");
        log.gaze.push_back(g);
      } else if (j.contains("ac")) {
        log.imu.push_back({ts_of(j), vec3_of(j.at("ac")), vec3_of(j.at("gy"))});
      } else {
        throw std::invalid_argument("unknown record kind");
      }
    } catch (const std::exception&) {
      ++log.skipped;
    }
  }
  if (log.gaze.empty() && log.pts.empty() && log.imu.empty()) {
    throw ValidationError(fmt::format("native log {} has zero parseable records", path.string()));
  }
  const auto monotone = [&](const auto& v, const char* kind) {
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i].ts_us < v[i - 1].ts_us) {
        throw ValidationError(fmt::format("native log {} records go backwards at ts {}", kind, v[i].ts_us));
      }
    }
  };
  monotone(log.gaze, "gaze");
  monotone(log.pts, "pts");
  monotone(log.imu, "imu");
  for (const auto& g : log.gaze) {
    if (g.valid && std::abs(g.gd3.norm() - 1.0) > kUnitTolerance) {
      throw ValidationError(fmt::format("native gaze direction at ts {} is not unit length", g.ts_us));
    }
  }
  return log;
}

std::vector<EyeEvent> load_eye_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot read eye-event table {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("eye-event table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = util::split(line, '\t');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);
  const auto require = [&](const char* name) {
    const auto it = col.find(name);
    if (it == col.end()) throw ValidationError(fmt::format("eye-event table lacks column \"{}\"", name));
    return it->second;
  };
  const std::size_t c_ts = require(kEyeEventTimestampColumn);
  const std::size_t c_type = require(kEyeEventTypeColumn);
  const std::size_t c_dur = require(kEyeEventDurationColumn);

  std::vector<EyeEvent> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = util::split(line, '\t');
    const auto cell = [&](std::size_t c) -> const std::string& {
      if (c >= f.size()) throw ValidationError(fmt::format("eye-event line {} has too few columns", line_no));
      return f[c];
    };
    EyeEvent e;
    try {
      std::size_t used = 0;
      e.ts_us = std::stoll(cell(c_ts), &used);
      if (used != cell(c_ts).size()) throw std::invalid_argument("trailing");
      e.duration_ms = cell(c_dur).empty() ? 0.0 : std::stod(cell(c_dur));
    } catch (const std::logic_error&) {
      throw ValidationError(fmt::format("eye-event line {} has a bad number", line_no));
    }
    const std::string& type = cell(c_type);
    if (type == "Fixation") {
      e.type = Label::fixation;
    } else if (type == "Saccade") {
      e.type = Label::saccade;
    } else if (type == "Unclassified") {
      e.type = Label::unclassified;
    } else {
      throw ValidationError(fmt::format("eye-event line {} has unknown movement type \"{}\"", line_no, type));
    }
    if (!rows.empty() && e.ts_us < rows.back().ts_us) {
      throw ValidationError(fmt::format("eye-event timestamps are non-monotone at line {}", line_no));
    }
    rows.push_back(e);
  }
  return rows;
}

CalibrationTransform load_calibration(const std::filesystem::path& path) {
  json j;
  try {
    j = toml::parse_file(path);
  } catch (const std::exception& e) {
    throw ValidationError(fmt::format("calibration {}: {}", path.string(), e.what()));
  }
  if (j.contains("calibration")) j = j.at("calibration");
  CalibrationTransform cal;
  try {
    if (j.contains("rotation_wxyz")) {
      const auto& r = j.at("rotation_wxyz");
      if (!r.is_array() || r.size() != 4) throw std::invalid_argument("rotation_wxyz needs 4 numbers");
      const Quaternion q{r[0].get<double>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>()};
      if (!q.finite() || std::abs(q.norm() - 1.0) > kUnitTolerance) {
        throw std::invalid_argument("rotation_wxyz must be a unit quaternion");
      }
      cal.rotation = q.normalized();
    }
    if (j.contains("translation_m")) cal.translation = vec3_of(j.at("translation_m"));
  } catch (const std::exception& e) {
    throw ValidationError(fmt::format("calibration {}: {}", path.string(), e.what()));
  }
  return cal;
}

}  // namespace pesao::proc
