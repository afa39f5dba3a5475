#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "flowtrack/types.hpp"

namespace flowtrack {

struct FrameMatches {
  Frame frame = 0;
  std::vector<std::pair<TrackId, TrackId>> pairs;  // (gt id, hypothesis id)
};

struct MotReport {
  double mota = 0.0;
  double motp = 0.0;  // mean IoU of matched pairs
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  std::size_t gt_boxes = 0;
  std::size_t hyp_boxes = 0;
  std::size_t matches = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t ids = 0;
  std::size_t frag = 0;
  std::size_t mostly_tracked = 0;  // gt tracks matched in >= 80% of their frames
  std::size_t mostly_lost = 0;     // gt tracks matched in < 20% of their frames
  std::size_t gt_tracks = 0;
  std::size_t idtp = 0;
  std::vector<FrameMatches> frames;
};

// CLEAR-MOT and identity metrics. A box pair matches when IoU >= iou_threshold.
// Throws std::invalid_argument for a threshold outside (0, 1] or repeated frames in a track.
MotReport evaluate(std::span<const OutputTrack> gt, std::span<const OutputTrack> hyp, double iou_threshold = 0.5);

// Fixed-field text report.
void print_report(std::ostream& out, const MotReport& report);
// JSON summary without per-frame matches.
void write_summary(std::ostream& out, const MotReport& report);

}  // namespace flowtrack
