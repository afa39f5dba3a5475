#pragma once

#include <filesystem>
#include <string>

#include "flowtrack/graph.hpp"
#include "flowtrack/model.hpp"
#include "flowtrack/synth.hpp"
#include "flowtrack/trainer.hpp"

namespace flowtrack {

// Everything an experiment needs, loadable from one JSON file. Missing keys keep defaults;
// unknown keys are rejected.
struct RunConfig {
  GraphParams graph;
  Architecture architecture;
  TrainConfig train;
  ScenarioConfig scenario;
  Frame chunk_length = 600;
  Frame overlap = 60;
  double iou_threshold = 0.5;
  int n_minlen = 2;
  double validation_fraction = 0.1;
  std::uint64_t model_seed = 1;
};

RunConfig parse_config(const std::string& json_text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& config);

}  // namespace flowtrack
