#include <iostream>

#include <CLI11.hpp>

#include "pesao/eval/eval.hpp"
#include "pesao/util/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Frusta, gaze-object hits and fixation statistics", "pesao-eval"};
  std::string synced;
  std::string objects_path;
  std::string out;
  pesao::eval::FrustumParams p;
  std::size_t stride = 50;
  app.add_option("--synced", synced, "directory written by pesao-process")->required();
  app.add_option("--objects", objects_path, "objects file (TOML)")->required();
  app.add_option("--hfov", p.hfov_deg, "horizontal field of view, degrees");
  app.add_option("--vfov", p.vfov_deg, "vertical field of view, degrees");
  app.add_option("--near", p.near_m, "near plane, meters");
  app.add_option("--far", p.far_m, "far plane, meters");
  app.add_option("--stride", stride, "one frustum every N records");
  app.add_option("--out", out, "output directory")->required();
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ds = pesao::proc::import_synced(synced);
    const auto objects = pesao::eval::load_objects(objects_path);
    const auto sums = pesao::eval::export_artifacts(ds, objects, out, p, stride);
    const auto stats = pesao::eval::fixation_stats(ds);
    std::cout << "records " << ds.records.size() << ", fixations " << stats.fixation_count << ", saccades "
              << stats.saccade_count << ", files " << sums.size() << "\n";
  } catch (const pesao::proc::ValidationError& e) {
    std::cerr << "pesao-eval: " << e.what() << "\n";
    return 2;
  } catch (const pesao::eval::EvalError& e) {
    std::cerr << "pesao-eval: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pesao-eval: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
