#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "flowtrack/geometry.hpp"

namespace flowtrack {

using Frame = std::int64_t;
using DetectionId = std::int64_t;
using TrackId = std::int64_t;

inline constexpr DetectionId kNoDetection = -1;

struct Detection {
  DetectionId id = 0;
  Frame frame = 0;
  BoundingBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct TrackPoint {
  Frame frame = 0;
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  friend bool operator==(const TrackPoint&, const TrackPoint&) = default;
};

// Sparse feature-point (KLT) track. Frames strictly increase along `points`.
struct PointTrack {
  TrackId id = 0;
  std::vector<TrackPoint> points;

  friend bool operator==(const PointTrack&, const PointTrack&) = default;
};

struct GroundTruthTrack {
  TrackId track_id = 0;
  std::vector<DetectionId> detections;

  friend bool operator==(const GroundTruthTrack&, const GroundTruthTrack&) = default;
};

struct TrackEntry {
  Frame frame = 0;
  BoundingBox box;
  bool interpolated = false;
  DetectionId detection = kNoDetection;

  friend bool operator==(const TrackEntry&, const TrackEntry&) = default;
};

struct OutputTrack {
  TrackId track_id = 0;
  std::vector<TrackEntry> entries;

  friend bool operator==(const OutputTrack&, const OutputTrack&) = default;
};

struct Dataset {
  std::vector<Detection> detections;
  std::vector<PointTrack> point_tracks;
  std::optional<std::vector<GroundTruthTrack>> ground_truth;
};

}  // namespace flowtrack
