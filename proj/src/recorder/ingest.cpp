#include "pesao/recorder/ingest.hpp"

#include <fmt/format.h>

namespace pesao::recorder {

bool is_marker_stream(StreamType t) { return t == StreamType::control || t == StreamType::light; }

StreamIngest::StreamIngest(StreamInfo info, double timesync_period_s, double timesync_timeout_s)
    : info_(std::move(info)), period_s_(timesync_period_s), tracker_(timesync_timeout_s) {}

std::optional<std::string> StreamIngest::poll_timesync(WorldTime now) {
  tracker_.expire(now);
  if (next_sync_ && now.seconds < *next_sync_) return std::nullopt;
  next_sync_ = (next_sync_ ? *next_sync_ : now.seconds) + period_s_;
  if (*next_sync_ <= now.seconds) next_sync_ = now.seconds + period_s_;  // fell behind: skip
  return tracker_.make_request(now);
}

std::optional<IngestItem> StreamIngest::on_line(std::string_view line, WorldTime arrival) {
  wire::Message m;
  try {
    m = wire::decode_message(line);
  } catch (const wire::DecodeError& e) {
    return DropItem{e.what()};
  }

  if (const auto* rep = std::get_if<wire::TimesyncReply>(&m)) {
    const auto meas = tracker_.on_reply(*rep, arrival);
    if (!meas) return std::nullopt;
    return OffsetItem{meas->world_mid(), meas->offset()};
  }
  if (const auto* pts = std::get_if<wire::PtsBeacon>(&m)) {
    if (info_.type != StreamType::gaze) return DropItem{"pts beacon on a non-gaze stream"};
    return PtsItem{{pts->t.seconds, std::vector<double>{static_cast<double>(pts->pts)}}};
  }
  const auto* s = std::get_if<wire::Sample>(&m);
  if (s == nullptr) return DropItem{"unexpected message on a data connection"};

  const bool marker = is_marker_stream(info_.type);
  std::size_t n = 0;
  if (const auto* v = std::get_if<std::vector<double>>(&s->values)) {
    if (marker) return DropItem{"numeric sample on a marker stream"};
    n = v->size();
  } else {
    if (!marker) return DropItem{"string sample on a numeric stream"};
    n = std::get<std::vector<std::string>>(s->values).size();
  }
  if (info_.channel_count > 0 && n != static_cast<std::size_t>(info_.channel_count)) {
    return DropItem{fmt::format("expected {} channels, got {}", info_.channel_count, n)};
  }
  if (last_t_ && s->t.seconds < *last_t_) return DropItem{"device timestamp went backwards"};
  last_t_ = s->t.seconds;

  xdf::XdfSample out;
  out.timestamp = s->t.seconds;
  if (const auto* v = std::get_if<std::vector<double>>(&s->values)) {
    out.values = *v;
  } else {
    out.values = std::get<std::vector<std::string>>(s->values);
  }
  return SampleItem{std::move(out)};
}

namespace {

// Validates before the writer creates the file so a rejected stream list
// leaves nothing on disk.
const std::filesystem::path& checked(const std::filesystem::path& path,
                                     const std::vector<StreamInfo>& streams) {
  for (const auto& info : streams) {
    if (info.channel_count <= 0) {
      throw xdf::WriterError(fmt::format("stream {} announces no channels", info.name));
    }
  }
  return path;
}

}  // namespace

xdf::StreamHeaderInfo header_for(const StreamInfo& info, std::uint32_t id) {
  xdf::StreamHeaderInfo h;
  h.stream_id = id;
  h.name = info.name;
  h.type_tag = std::string(to_string(info.type));
  h.channel_count = info.channel_count;
  h.nominal_rate_hz = info.nominal_rate_hz;
  h.channel_format =
      is_marker_stream(info.type) ? xdf::ChannelFormat::string : xdf::ChannelFormat::double64;
  h.metadata = {{"uid", info.uid}, {"host", info.host}, {"port", info.port}};
  if (info.type == StreamType::mocap) {
    h.metadata["channel_layout"] = "per body: id px py pz qw qx qy qz err";
  } else if (info.type == StreamType::gaze) {
    h.metadata["channel_layout"] = "ox oy oz dx dy dz u v valid";
  } else {
    h.metadata["channel_layout"] = "kind payload";
  }
  return h;
}

ContainerSink::ContainerSink(const std::filesystem::path& path, const nlohmann::json& metadata,
                             const std::vector<StreamInfo>& streams, double boundary_period_s)
    : writer_(checked(path, streams), metadata),
      streams_(streams),
      counts_(streams.size()),
      pts_ids_(streams.size()),
      boundary_period_s_(boundary_period_s) {
  auto next_id = static_cast<std::uint32_t>(streams.size() + 1);
  for (std::size_t i = 0; i < streams.size(); ++i) {
    writer_.add_stream(header_for(streams[i], stream_id(i)));
  }
  for (std::size_t i = 0; i < streams.size(); ++i) {
    if (streams[i].type != StreamType::gaze) continue;
    xdf::StreamHeaderInfo h;
    h.stream_id = next_id;
    h.name = streams[i].name + "-pts";
    h.type_tag = kPtsTypeTag;
    h.channel_count = 1;
    h.nominal_rate_hz = 1.0;
    h.metadata = {{"companion_of", stream_id(i)}, {"uid", streams[i].uid + "-pts"}};
    writer_.add_stream(h);
    pts_ids_[i] = next_id++;
  }
}

std::optional<std::uint32_t> ContainerSink::pts_stream_id(std::size_t index) const {
  return pts_ids_.at(index);
}

void ContainerSink::apply(std::size_t index, const IngestItem& item) {
  apply(index, std::vector<IngestItem>{item});
}

void ContainerSink::apply(std::size_t index, const std::vector<IngestItem>& items) {
  auto& c = counts_.at(index);
  std::vector<xdf::XdfSample> run;
  const auto flush = [&] {
    if (run.empty()) return;
    writer_.append_samples(stream_id(index), run);
    c.samples += run.size();
    run.clear();
  };
  for (const auto& item : items) {
    if (const auto* s = std::get_if<SampleItem>(&item)) {
      run.push_back(s->sample);
      continue;
    }
    flush();
    if (const auto* o = std::get_if<OffsetItem>(&item)) {
      writer_.append_clock_offset(stream_id(index), o->collection_time, o->offset);
      ++c.clock_offsets;
    } else if (const auto* p = std::get_if<PtsItem>(&item)) {
      const auto id = pts_ids_.at(index);
      if (!id) {
        ++c.drops;
        continue;
      }
      writer_.append_samples(*id, std::span<const xdf::XdfSample>(&p->sample, 1));
      ++c.pts;
    } else {
      ++c.drops;
    }
  }
  flush();
}

void ContainerSink::tick(WorldTime now) {
  if (!last_boundary_) {
    last_boundary_ = now.seconds;
    return;
  }
  if (now.seconds - *last_boundary_ >= boundary_period_s_) {
    writer_.append_boundary();
    last_boundary_ = now.seconds;
  }
}

void ContainerSink::finalize() { writer_.finalize(); }

}  // namespace pesao::recorder
