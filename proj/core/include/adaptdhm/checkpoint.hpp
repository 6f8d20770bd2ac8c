#pragma once

#include <string>

#include "adaptdhm/model.hpp"

namespace adaptdhm {

// Versioned little-endian binary container holding the full model state:
// config, schema, embedding tables, shared and branch MLPs, cluster centers,
// every Adam moment, and the step counters. Doubles travel as IEEE-754 bit
// patterns, so save -> load -> save reproduces the file byte for byte.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Model& model, const std::string& config_echo);

struct LoadedCheckpoint {
  Model model;
  std::string config_echo;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace adaptdhm
