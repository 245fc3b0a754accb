#include "sim_cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "pesao/sim/server.hpp"
#include "signals.hpp"

namespace pesao::tools {

int run_sim_cli(SimKind kind, int argc, char** argv) {
  const char* names[] = {"mocap-sim", "gaze-sim", "light-sim"};
  CLI::App app{"Simulated PESAO device stream", names[static_cast<int>(kind)]};
  std::string scenario_path;
  int port = 0;
  bool accelerated = false;
  std::optional<std::uint64_t> seed;
  std::string native_log;
  std::string truth_path;
  std::string uid;
  bool no_announce = false;
  bool exit_when_done = false;
  app.add_option("--scenario", scenario_path, "scenario file (TOML subset)")->required()->check(CLI::ExistingFile);
  app.add_option("--port", port, "TCP port to serve on (0 picks one)");
  app.add_flag("--accelerated", accelerated, "emit as fast as the subscriber reads");
  app.add_option("--seed", seed, "override the scenario seed");
  if (kind == SimKind::gaze) app.add_option("--native-log", native_log, "write the on-device log (gzip)");
  if (kind != SimKind::light) app.add_option("--ground-truth", truth_path, "write ground truth TSV");
  app.add_option("--uid", uid, "stream uid (default name-pid-port)");
  app.add_flag("--no-announce", no_announce, "do not answer discovery probes");
  app.add_flag("--exit-when-done", exit_when_done, "exit once the scenario has been sent");
  CLI11_PARSE(app, argc, argv);

  try {
    sim::Scenario s = sim::load_scenario(scenario_path);
    if (seed) s.seed = *seed;
    std::unique_ptr<sim::GroundTruthWriter> truth;
    if (!truth_path.empty()) truth = std::make_unique<sim::GroundTruthWriter>(truth_path, s);

    std::unique_ptr<sim::EmissionSource> source;
    switch (kind) {
      case SimKind::mocap:
        source = sim::make_mocap_source(s, s.seed, truth.get());
        break;
      case SimKind::gaze: {
        std::optional<std::filesystem::path> log;
        if (!native_log.empty()) log = native_log;
        source = sim::make_gaze_source(s, s.seed, log, truth.get());
        break;
      }
      case SimKind::light:
        source = sim::make_light_source(s);
        break;
    }

    sim::ServerOptions opt;
    opt.port = port;
    opt.accelerated = accelerated;
    opt.announce = !no_announce;
    opt.uid = uid;
    opt.link = s.link;
    opt.seed = s.seed;
    sim::SimServer server(std::move(source), opt);
    install_signal_handlers();
    server.start();
    std::cout << server.info().name << " " << server.info().uid << " listening on port " << server.port()
              << (accelerated ? " (accelerated)" : "") << std::endl;
    wait_until_interrupted([&] { return exit_when_done && server.finished(); });
    server.stop();
    if (truth) truth->close();
    std::cout << "emitted " << server.emitted() << " of " << server.total() << std::endl;
  } catch (const std::exception& e) {
    std::cerr << names[static_cast<int>(kind)] << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace pesao::tools
