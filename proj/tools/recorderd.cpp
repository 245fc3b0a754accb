#include <iostream>

#include <CLI11.hpp>

#include "pesao/recorder/api.hpp"
#include "signals.hpp"

int main(int argc, char** argv) {
  CLI::App app{"PESAO recorder service", "recorderd"};
  std::string study_root;
  int http_port = 8080;
  double discovery_timeout_s = 0.5;
  std::string bind = "0.0.0.0";
  std::string ui_root;
  app.add_option("--study-root", study_root, "directory for recorded sessions")->required();
  app.add_option("--http-port", http_port, "HTTP/WS port");
  app.add_option("--discovery-timeout", discovery_timeout_s, "seconds to wait for announces");
  app.add_option("--bind", bind, "listen address");
  app.add_option("--ui-root", ui_root, "console assets served under /ui");
  CLI11_PARSE(app, argc, argv);

  try {
    pesao::recorder::RecorderConfig cfg;
    cfg.study_root = study_root;
    cfg.discovery_timeout = std::chrono::milliseconds(static_cast<long>(discovery_timeout_s * 1000.0));
    pesao::recorder::RecorderService service(cfg);

    pesao::recorder::ApiOptions api;
    api.port = http_port;
    api.bind = bind;
    if (!ui_root.empty()) api.ui_root = ui_root;
    pesao::recorder::ApiServer server(service, api);
    pesao::tools::install_signal_handlers();
    server.start();
    std::cout << "recorderd listening on " << bind << ":" << server.port() << std::endl;
    pesao::tools::wait_until_interrupted([] { return false; });
    server.stop();
    if (service.phase() == pesao::recorder::Phase::recording) {
      const auto m = service.stop_recording();
      std::cout << "stopped recording: " << m.value("manifest_path", "") << std::endl;
    }
  } catch (const std::exception& e) {
    std::cerr << "recorderd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
