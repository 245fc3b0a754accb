#include "pesao/core/types.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace pesao {

std::vector<double> GazeSample::to_channels() const {
  return {origin_g.x, origin_g.y, origin_g.z, dir_g.x,   dir_g.y,
          dir_g.z,    gaze2d[0],  gaze2d[1],  valid ? 1.0 : 0.0};
}

GazeSample GazeSample::from_channels(DeviceTime t, const std::vector<double>& ch) {
  if (ch.size() != kChannels) {
    throw std::invalid_argument("gaze sample needs 9 channels, got " + std::to_string(ch.size()));
  }
  GazeSample g;
  g.t = t;
  g.origin_g = {ch[0], ch[1], ch[2]};
  g.dir_g = {ch[3], ch[4], ch[5]};
  g.gaze2d = {ch[6], ch[7]};
  g.valid = ch[8] != 0.0;
  return g;
}

std::vector<double> MocapFrame::to_channels() const {
  std::vector<double> out;
  out.reserve(bodies.size() * kChannelsPerBody);
  for (const auto& b : bodies) {
    const auto& p = b.pose.position;
    const auto& q = b.pose.orientation;
    out.insert(out.end(), {static_cast<double>(b.body_id), p.x, p.y, p.z, q.w, q.x, q.y, q.z,
                           b.mean_marker_error});
  }
  return out;
}

MocapFrame MocapFrame::from_channels(DeviceTime t, const std::vector<double>& ch) {
  if (ch.size() % kChannelsPerBody != 0) {
    throw std::invalid_argument("mocap frame channel count " + std::to_string(ch.size()) +
                                " is not a multiple of 9");
  }
  MocapFrame f;
  f.t = t;
  for (std::size_t i = 0; i < ch.size(); i += kChannelsPerBody) {
    RigidBodyState b;
    b.body_id = static_cast<int>(ch[i]);
    b.pose.position = {ch[i + 1], ch[i + 2], ch[i + 3]};
    b.pose.orientation = {ch[i + 4], ch[i + 5], ch[i + 6], ch[i + 7]};
    b.pose.t = t.seconds;
    b.mean_marker_error = ch[i + 8];
    f.bodies.push_back(b);
  }
  return f;
}

namespace {

constexpr std::array<std::pair<MarkerKind, std::string_view>, 5> kMarkerNames{{
    {MarkerKind::trial_start, "trial_start"},
    {MarkerKind::trial_end, "trial_end"},
    {MarkerKind::note, "note"},
    {MarkerKind::answer, "answer"},
    {MarkerKind::light_change, "light_change"},
}};

constexpr std::array<std::pair<StreamType, std::string_view>, 4> kStreamTypeNames{{
    {StreamType::mocap, "mocap"},
    {StreamType::gaze, "gaze"},
    {StreamType::control, "control"},
    {StreamType::light, "light"},
}};

}  // namespace

std::string_view to_string(MarkerKind k) {
  for (const auto& [kind, name] : kMarkerNames) {
    if (kind == k) return name;
  }
  return "note";
}

std::optional<MarkerKind> marker_kind_from_string(std::string_view s) {
  for (const auto& [kind, name] : kMarkerNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(StreamType t) {
  for (const auto& [type, name] : kStreamTypeNames) {
    if (type == t) return name;
  }
  return "mocap";
}

std::optional<StreamType> stream_type_from_string(std::string_view s) {
  for (const auto& [type, name] : kStreamTypeNames) {
    if (name == s) return type;
  }
  return std::nullopt;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

void MarkerEvent::validate() const {
  if (payload.size() > kMaxMarkerPayload) {
    throw std::invalid_argument("marker payload exceeds 4096 bytes");
  }
  if (!is_valid_utf8(payload)) throw std::invalid_argument("marker payload is not valid UTF-8");
}

}  // namespace pesao
