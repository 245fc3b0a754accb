#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pesao/xdf/xdf.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Validate a PESAO .xdf container", "xdfcheck"};
  std::string path;
  app.add_option("file", path, "container")->required();
  CLI11_PARSE(app, argc, argv);

  std::vector<std::uint8_t> bytes;
  try {
    bytes = pesao::xdf::read_bytes(path);
  } catch (const std::exception& e) {
    std::cerr << "xdfcheck: " << e.what() << "\n";
    return 1;
  }
  const auto report = pesao::xdf::validate(bytes);
  if (!report.ok) {
    std::cout << fmt::format("{}: invalid at byte offset {}: {}\n", path, report.bad_offset, report.error);
    return 1;
  }
  std::cout << fmt::format("{}: ok, {} chunks, {} bytes\n", path, report.chunks.size(), bytes.size());
  std::cout << fmt::format("{:>3}  {:<20} {:<10} {:>3} {:<8} {:>9} {:>9} {:>7} {:>16} {:>16}\n", "id", "name",
                           "type", "ch", "format", "rate_hz", "samples", "offsets", "first", "last");
  for (const auto& s : report.recording.streams) {
    const auto& h = s.header;
    const auto first = s.footer ? fmt::format("{:.6f}", s.footer->first_timestamp) : "-";
    const auto last = s.footer ? fmt::format("{:.6f}", s.footer->last_timestamp) : "-";
    std::cout << fmt::format("{:>3}  {:<20} {:<10} {:>3} {:<8} {:>9.3f} {:>9} {:>7} {:>16} {:>16}\n", h.stream_id,
                             h.name, h.type_tag, h.channel_count,
                             h.channel_format == pesao::xdf::ChannelFormat::string ? "string" : "double64",
                             h.nominal_rate_hz, s.samples.size(), s.clock_offsets.size(), first, last);
  }
  return 0;
}
