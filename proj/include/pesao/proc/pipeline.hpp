#pragma once

#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

#include "pesao/proc/dataset.hpp"

namespace pesao::proc {

struct ProcessInputs {
  std::filesystem::path xdf;
  std::filesystem::path native_log;
  std::optional<std::filesystem::path> eye_events;
  std::optional<std::filesystem::path> calibration;
};

/// Loads the inputs, builds the dataset and writes the CSVs plus
/// manifest.json into `out_dir`. Returns the manifest.
nlohmann::json run_process(const ProcessInputs& in, ProcessOptions opt, const std::filesystem::path& out_dir,
                           SyncedDataset* dataset_out = nullptr);

}  // namespace pesao::proc
