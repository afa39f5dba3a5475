#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "flowtrack/graph.hpp"
#include "flowtrack/types.hpp"

namespace flowtrack {

struct ScenarioConfig {
  int n_objects = 20;
  Frame n_frames = 600;
  double image_width = 1920.0;
  double image_height = 1080.0;
  int fps = 10;

  // Motion: piecewise-linear paths through random waypoints at a per-object speed.
  double min_speed = 3.0;  // pixels per frame
  double max_speed = 8.0;
  double min_box_width = 40.0;
  double max_box_width = 90.0;
  double min_aspect = 2.0;  // height / width
  double max_aspect = 3.0;
  // Box width and height drift: the per-frame log-size change is a smooth random process
  // with this stationary sd and correlation time (frames).
  double size_rate_sigma = 0.02;
  double size_rate_time = 10.0;
  Frame min_lifetime = 150;
  Frame max_lifetime = 450;

  double miss_rate = 0.10;
  double false_positives_per_frame = 2.0;  // Poisson mean
  double jitter_sigma = 2.0;               // pixels, per box coordinate
  double jitter_time = 5.0;                // correlation time of the box error in frames; 0 draws it fresh each frame
  double min_true_confidence = 0.5;
  double max_false_confidence = 0.6;

  int klt_per_object = 4;
  double klt_lifetime_mean = 40.0;  // frames, geometric
  double klt_noise = 0.5;           // pixels
  double jump_rate = 0.3;           // per point and occlusion episode
  double jump_iou = 0.3;            // boxes overlapping more than this form an occlusion

  std::uint64_t seed = 1;

  void validate() const;
  GraphParams graph_params() const { return GraphParams::for_fps(fps, std::hypot(image_width, image_height)); }
};

struct Scenario {
  GraphParams params;
  std::vector<OutputTrack> gt_boxes;     // true box of every object in every frame it exists
  std::vector<GroundTruthTrack> gt;      // detection ids emitted for each object
  std::vector<Detection> detections;     // ids 1..n in frame order
  std::vector<PointTrack> point_tracks;  // ids 1..n
};

Scenario generate_scenario(const ScenarioConfig& config);

// Two objects crossing with an occlusion of the rear one, a third object handing over to a
// fourth along the same path, and three false positives. Small enough to inspect by hand.
Scenario crossing_fixture();

// Writes detections.jsonl, klt.jsonl, gt.jsonl (detection ids) and gt_boxes.jsonl.
void write_scenario(const std::filesystem::path& directory, const Scenario& scenario);

}  // namespace flowtrack
