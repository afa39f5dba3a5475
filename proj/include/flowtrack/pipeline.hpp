#pragma once

#include <span>
#include <utility>
#include <vector>

#include "flowtrack/graph.hpp"
#include "flowtrack/model.hpp"
#include "flowtrack/solver.hpp"
#include "flowtrack/types.hpp"

namespace flowtrack {

struct ChunkPlan {
  Frame chunk_length = 600;
  Frame overlap = 60;
  std::vector<std::pair<Frame, Frame>> windows;  // inclusive [start, end]
};

// Windows start at first_frame and advance by chunk_length - overlap; the last one is
// clipped to last_frame. Throws std::invalid_argument unless chunk_length > overlap >= 0.
ChunkPlan plan_chunks(Frame first_frame, Frame last_frame, Frame chunk_length, Frame overlap);

struct IdMap {
  std::vector<std::pair<TrackId, TrackId>> local_to_global;  // sorted by local id
  std::vector<TrackId> fresh;                                // global ids created for unmatched tracks

  TrackId at(TrackId local) const;
};

// Matches next-chunk tracks to previous global tracks by the number of detections they
// share inside [window.first, window.second]. Unmatched or zero-overlap tracks receive
// fresh ids starting at next_global_id, which is advanced.
IdMap stitch(std::span<const OutputTrack> previous, std::span<const OutputTrack> next,
             std::pair<Frame, Frame> overlap_window, TrackId& next_global_id);

// Fills every missing frame between consecutive entries with linearly interpolated boxes.
OutputTrack interpolate_track(const OutputTrack& track);

struct TrackingOptions {
  ShortestPathMode mode = ShortestPathMode::Potentials;
  bool interpolate = true;
};

// Single graph over the given detections.
std::vector<OutputTrack> track_window(std::span<const Detection> detections, std::span<const PointTrack> tracks,
                                      const ScoringModel& model, const GraphParams& params,
                                      ShortestPathMode mode = ShortestPathMode::Potentials);

// Chunked tracking with id stitching; tracks sorted by id, ids 1..n. Every chunk graph sees
// the full point tracks, so it is the induced subgraph of the single-graph build.
std::vector<OutputTrack> track_sequence(std::span<const Detection> detections, std::span<const PointTrack> tracks,
                                        const ScoringModel& model, const GraphParams& params, const ChunkPlan& plan,
                                        const TrackingOptions& options = {});

// Plan covering every detection frame.
ChunkPlan plan_for(std::span<const Detection> detections, Frame chunk_length, Frame overlap);

}  // namespace flowtrack
