#include "sim_cli.hpp"

int main(int argc, char** argv) { return pesao::tools::run_sim_cli(pesao::tools::SimKind::light, argc, argv); }
