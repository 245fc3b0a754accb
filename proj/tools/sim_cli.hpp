#pragma once

namespace pesao::tools {

enum class SimKind { mocap, gaze, light };

int run_sim_cli(SimKind kind, int argc, char** argv);

}  // namespace pesao::tools
