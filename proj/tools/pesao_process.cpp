#include <iostream>

#include <CLI11.hpp>

#include "pesao/proc/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synchronize and fuse a recorded session", "pesao-process"};
  pesao::proc::ProcessInputs in;
  pesao::proc::ProcessOptions opt;
  std::string eye_events;
  std::string calib;
  std::string out;
  app.add_option("--xdf", in.xdf, "recorded container")->required();
  app.add_option("--native", in.native_log, "glasses' native log (gzipped NDJSON)")->required();
  app.add_option("--eye-events", eye_events, "eye-event table (TSV); replaces built-in I-VT");
  app.add_option("--calib", calib, "glasses-to-body calibration (TOML)");
  app.add_option("--ivt-threshold", opt.ivt.threshold_deg_s, "I-VT velocity threshold, deg/s");
  app.add_option("--min-fixation-ms", opt.ivt.min_fixation_ms, "shortest kept fixation");
  app.add_option("--merge-gap-ms", opt.ivt.merge_gap_ms, "largest gap merged between fixations");
  app.add_option("--max-pose-gap", opt.max_pose_gap_s, "widest mocap hole interpolated across, s");
  app.add_option("--out", out, "output directory")->required();
  CLI11_PARSE(app, argc, argv);
  if (!eye_events.empty()) in.eye_events = eye_events;
  if (!calib.empty()) in.calibration = calib;

  try {
    const auto m = pesao::proc::run_process(in, opt, out);
    const auto& c = m.at("counts");
    std::cout << "records " << c.at("records") << ", uncovered " << c.at("uncovered") << ", fixations "
              << c.at("fixation_segments") << ", saccades " << c.at("saccade_segments") << ", markers "
              << c.at("markers") << "\n";
  } catch (const pesao::proc::ValidationError& e) {
    std::cerr << "pesao-process: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pesao-process: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
