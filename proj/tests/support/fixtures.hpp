#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "flowtrack/ggd.hpp"
#include "flowtrack/graph.hpp"
#include "flowtrack/model.hpp"
#include "flowtrack/random.hpp"
#include "flowtrack/solver.hpp"
#include "flowtrack/synth.hpp"

namespace flowtrack::fixtures {

// Random DAG over n vertices (edges only from lower to higher index) with weights in
// [-2, 2] and s_entry in [-2, 0].
WeightedGraph random_weighted_graph(Rng& rng, std::size_t n, double edge_probability);

// Chain of boxes moving right, one detection per frame, with a point track through all of them.
struct Chain {
  std::vector<Detection> detections;
  std::vector<PointTrack> tracks;
};
Chain straight_chain(int n, DetectionId first_id = 1, double y = 100.0);

// A small architecture so finite differences stay affordable.
Architecture tiny_architecture();

// Single-layer model with hand-set weights: detection score 20*conf - 10, edge score from
// the mean translated IoU / predicted IoU minus a temporal-gap penalty, plus a bonus per
// shared point track.
ScoringModel hand_model();

struct FixtureGraph {
  Scenario scenario;
  TrackingGraph graph;
  FeasibleSolution truth;
};
FixtureGraph crossing_graph();

// Graph with the given vertex frames (ids 1..n in that order) and edges, each edge
// carrying one KLT connection with features derived from its index.
TrackingGraph manual_graph(const std::vector<Frame>& frames,
                           const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges);

// Two gt tracks over frames 0-4 (10 boxes) and a hypothesis with exactly one FP, one FN
// and one identity switch: MOTA 0.7, IDF1 0.8.
struct MotFixture {
  std::vector<OutputTrack> gt;
  std::vector<OutputTrack> hyp;
};
MotFixture hand_counted_mota();

std::vector<std::uint32_t> vertices_of(const TrackingGraph& graph, std::initializer_list<DetectionId> ids);

std::filesystem::path temp_dir(const std::string& name);

}  // namespace flowtrack::fixtures
