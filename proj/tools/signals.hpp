#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <thread>

namespace pesao::tools {

inline std::atomic<bool> g_interrupted{false};

inline void install_signal_handlers() {
  const auto handler = [](int) { g_interrupted = true; };
  std::signal(SIGINT, handler);
  std::signal(SIGTERM, handler);
  std::signal(SIGPIPE, SIG_IGN);
}

/// Sleeps until SIGINT/SIGTERM or until `done` returns true.
template <class Pred>
void wait_until_interrupted(Pred done) {
  while (!g_interrupted && !done()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

}  // namespace pesao::tools
