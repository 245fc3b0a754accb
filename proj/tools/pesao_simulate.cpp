#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "pesao/recorder/virtual_session.hpp"

namespace fs = std::filesystem;

// Runs a scripted session on a virtual clock and writes the three inputs the
// processor needs plus ground truth.
int main(int argc, char** argv) {
  CLI::App app{"Simulate a full recording session offline", "pesao-simulate"};
  std::string scenario_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool no_light = false;
  std::vector<std::string> notes;
  app.add_option("--scenario", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory (created)")->required();
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_flag("--no-light", no_light, "leave out the light stream");
  app.add_option("--note", notes, "operator note as <t_s>:<text>");
  CLI11_PARSE(app, argc, argv);

  try {
    auto s = pesao::sim::load_scenario(scenario_path);
    if (seed) s.seed = *seed;
    fs::create_directories(out);
    pesao::recorder::VirtualSessionOptions opt;
    opt.container = fs::path(out) / "session.xdf";
    opt.native_log = fs::path(out) / "livedata.ndjson.gz";
    opt.ground_truth = fs::path(out) / "ground_truth.tsv";
    opt.with_light = !no_light;
    opt.seed = s.seed;
    for (const auto& n : notes) {
      const auto colon = n.find(':');
      if (colon == std::string::npos) throw std::invalid_argument("note must be <t_s>:<text>");
      opt.notes.emplace_back(std::stod(n.substr(0, colon)), n.substr(colon + 1));
    }
    opt.metadata = {{"session", fs::path(scenario_path).stem().string()}, {"seed", s.seed}};
    const auto result = pesao::recorder::run_virtual_session(s, opt);
    for (const auto& r : result.streams) {
      std::cout << r.name << ": emitted " << r.emitted << ", recorded " << r.recorded.samples << ", offsets "
                << r.recorded.clock_offsets << ", drops " << r.recorded.drops << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "pesao-simulate: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
