#include "pesao/wire/message.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace pesao::wire {
namespace {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

double finite_or_throw(double v, const char* field) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("field ") + field + " is not finite");
  }
  return v;
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

ojson to_json(const Message& m) {
  return std::visit(
      overloaded{
          [](const DiscoverProbe&) { return ojson{{"type", "discover"}}; },
          [](const Announce& a) {
            ojson j;
            j["type"] = "announce";
            j["uid"] = a.info.uid;
            j["name"] = a.info.name;
            j["stype"] = std::string(to_string(a.info.type));
            j["rate"] = finite_or_throw(a.info.nominal_rate_hz, "rate");
            j["channels"] = a.info.channel_count;
            j["host"] = a.info.host;
            j["port"] = a.info.port;
            return j;
          },
          [](const Sample& s) {
            ojson j;
            j["type"] = "sample";
            j["t"] = finite_or_throw(s.t.seconds, "t");
            if (const auto* v = std::get_if<std::vector<double>>(&s.values)) {
              ojson arr = ojson::array();
              for (double x : *v) arr.push_back(finite_or_throw(x, "v"));
              j["v"] = std::move(arr);
            } else {
              j["s"] = std::get<std::vector<std::string>>(s.values);
            }
            return j;
          },
          [](const TimesyncRequest& r) {
            return ojson{{"type", "tsreq"}, {"t1", finite_or_throw(r.t1.seconds, "t1")}};
          },
          [](const TimesyncReply& r) {
            return ojson{{"type", "tsrep"},
                         {"t1", finite_or_throw(r.t1.seconds, "t1")},
                         {"t2", finite_or_throw(r.t2.seconds, "t2")},
                         {"t3", finite_or_throw(r.t3.seconds, "t3")}};
          },
          [](const PtsBeacon& p) {
            return ojson{
                {"type", "pts"}, {"t", finite_or_throw(p.t.seconds, "t")}, {"pts", p.pts}};
          },
      },
      m);
}

const json& require(const json& j, const char* field) {
  const auto it = j.find(field);
  if (it == j.end()) throw DecodeError(std::string("missing required field ") + field);
  return *it;
}

double number(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_number()) throw DecodeError(std::string("field ") + field + " not a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw DecodeError(std::string("field ") + field + " is not finite");
  return d;
}

std::int64_t integer(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_number_integer()) throw DecodeError(std::string("field ") + field + " not an integer");
  return v.get<std::int64_t>();
}

std::string text(const json& j, const char* field) {
  const json& v = require(j, field);
  if (!v.is_string()) throw DecodeError(std::string("field ") + field + " not a string");
  return v.get<std::string>();
}

}  // namespace

std::string encode_message(const Message& m) {
  std::string line = to_json(m).dump();
  line.push_back('\n');
  if (line.size() > kMaxLineBytes) {
    throw PayloadTooLarge("encoded message is " + std::to_string(line.size()) +
                          " bytes, limit is 65536");
  }
  return line;
}

Message decode_message(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() > kMaxLineBytes) throw DecodeError("line exceeds 64 KiB");

  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DecodeError(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object()) throw DecodeError("message is not an object");
  const std::string type = text(j, "type");

  if (type == "discover") return DiscoverProbe{};
  if (type == "announce") {
    StreamInfo info;
    info.uid = text(j, "uid");
    info.name = text(j, "name");
    const auto st = stream_type_from_string(text(j, "stype"));
    if (!st) throw DecodeError("unknown stream type " + j["stype"].get<std::string>());
    info.type = *st;
    info.nominal_rate_hz = number(j, "rate");
    info.channel_count = static_cast<int>(integer(j, "channels"));
    info.host = text(j, "host");
    info.port = static_cast<int>(integer(j, "port"));
    return Announce{info};
  }
  if (type == "sample") {
    Sample s;
    s.t = DeviceTime{number(j, "t")};
    if (const auto it = j.find("v"); it != j.end()) {
      if (!it->is_array()) throw DecodeError("field v not an array");
      std::vector<double> v;
      v.reserve(it->size());
      for (const auto& x : *it) {
        if (!x.is_number()) throw DecodeError("field v holds a non-number");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw DecodeError("field v is not finite");
        v.push_back(d);
      }
      s.values = std::move(v);
    } else if (const auto it2 = j.find("s"); it2 != j.end()) {
      if (!it2->is_array()) throw DecodeError("field s not an array");
      std::vector<std::string> v;
      for (const auto& x : *it2) {
        if (!x.is_string()) throw DecodeError("field s holds a non-string");
        v.push_back(x.get<std::string>());
      }
      s.values = std::move(v);
    } else {
      throw DecodeError("missing required field v");
    }
    return s;
  }
  if (type == "tsreq") return TimesyncRequest{WorldTime{number(j, "t1")}};
  if (type == "tsrep") {
    return TimesyncReply{WorldTime{number(j, "t1")}, DeviceTime{number(j, "t2")},
                         DeviceTime{number(j, "t3")}};
  }
  if (type == "pts") return PtsBeacon{DeviceTime{number(j, "t")}, integer(j, "pts")};
  throw DecodeError("unknown message type " + type);
}

Sample marker_sample(const MarkerEvent& e) {
  e.validate();
  return Sample{e.t, std::vector<std::string>{std::string(to_string(e.kind)), e.payload}};
}

MarkerEvent marker_from_sample(const Sample& s) {
  const auto* v = std::get_if<std::vector<std::string>>(&s.values);
  if (v == nullptr || v->size() != 2) throw DecodeError("marker sample needs [kind, payload]");
  const auto kind = marker_kind_from_string((*v)[0]);
  if (!kind) throw DecodeError("unknown marker kind " + (*v)[0]);
  MarkerEvent e{s.t, *kind, (*v)[1]};
  e.validate();
  return e;
}

}  // namespace pesao::wire
