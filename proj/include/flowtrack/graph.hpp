#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowtrack/geometry.hpp"
#include "flowtrack/types.hpp"

namespace flowtrack {

struct GraphParams {
  int r_neighbours = 5;
  Frame t_max = 30;
  Frame n_velest = 5;
  Frame n_project = 10;
  int n_linpkt = 5;
  int fps = 10;
  double image_diagonal = 2202.9071700822983;  // 1920x1080

  // r_neighbours=5, t_max=3*fps, n_velest=max(2, fps/2), n_project=fps.
  static GraphParams for_fps(int fps, double image_diagonal);
  void validate() const;

  friend bool operator==(const GraphParams&, const GraphParams&) = default;
};

// Normalisation applied when raw features become network inputs: pixel quantities are
// divided by the image diagonal, temporal distances by fps.
struct FeatureScale {
  double fps = 10.0;
  double diagonal = 2202.9071700822983;

  friend bool operator==(const FeatureScale&, const FeatureScale&) = default;
};

struct DetectionFeatures {
  double confidence = 0.0;
  double max_iou = 0.0;
  double max_ioa = 0.0;

  friend bool operator==(const DetectionFeatures&, const DetectionFeatures&) = default;
};

struct KltConnection {
  TrackId track_id = 0;
  Frame temporal_distance = 1;
  double min_confidence = 0.0;
  double translated_iou = 0.0;
  std::vector<Vec2> shape;  // n_linpkt points, shape[0] == (0,0)

  friend bool operator==(const KltConnection&, const KltConnection&) = default;
};

struct LongConnection {
  Frame temporal_distance = 1;
  double predicted_iou = 0.0;
  Vec2 pre_velocity;          // pixels/frame
  Vec2 median_post_velocity;  // pixels/frame, (0,0) when the target has no post velocity

  friend bool operator==(const LongConnection&, const LongConnection&) = default;
};

struct EdgeFeatures {
  std::vector<KltConnection> klt;
  std::vector<LongConnection> long_range;

  friend bool operator==(const EdgeFeatures&, const EdgeFeatures&) = default;
};

struct GraphEdge {
  std::uint32_t from = 0;  // vertex index
  std::uint32_t to = 0;    // vertex index, to > from
  EdgeFeatures features;
};

struct GraphVertex {
  Detection detection;
  DetectionFeatures features;
};

// Vertex/edge incidence shared by tracking graphs, weighted graphs and solutions.
// Vertices are indexed in topological order: every edge satisfies from < to.
struct Topology {
  std::size_t n_vertices = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;

  std::optional<std::uint32_t> find_edge(std::uint32_t from, std::uint32_t to) const;
  void index();  // rebuilds the lookup table; call after editing `edges`

  std::vector<std::vector<std::uint32_t>> outgoing() const;  // edge indices per vertex
  std::vector<std::vector<std::uint32_t>> incoming() const;

 private:
  std::unordered_map<std::uint64_t, std::uint32_t> lookup_;
};

struct TrackingGraph {
  GraphParams params;
  std::vector<GraphVertex> vertices;  // sorted by (frame, detection id)
  std::vector<GraphEdge> edges;       // sorted by (from, to)
  Topology topology;

  FeatureScale scale() const { return {double(params.fps), params.image_diagonal}; }
  std::optional<std::uint32_t> vertex_of(DetectionId id) const;
  void rebuild_index();

 private:
  std::unordered_map<DetectionId, std::uint32_t> vertex_lookup_;
};

class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A_i for every point track: indices into `detections`, ordered by (frame, detection id).
std::vector<std::vector<std::uint32_t>> intersect_tracks(std::span<const Detection> detections,
                                                         std::span<const PointTrack> tracks);

// Forward neighbour pairs, as positions into `sequence`, given each entry's frame.
std::vector<std::pair<std::size_t, std::size_t>> neighbour_pairs(std::span<const Frame> sequence_frames,
                                                                 int r_neighbours, Frame t_max);

Vec2 fit_velocity(std::span<const TrackPoint> points);
std::optional<Vec2> pre_velocity(const PointTrack& track, Frame t, Frame n_velest);
std::optional<Vec2> post_velocity(const PointTrack& track, Frame t, Frame n_velest);

// Piecewise-linear position of the track at time t (t inside the track's span).
Vec2 track_position(const PointTrack& track, double t);

DetectionFeatures detection_features(const Detection& detection, std::span<const Detection> same_frame);

KltConnection klt_connection_features(const PointTrack& track, const Detection& from, const Detection& to,
                                      int n_linpkt);

// Key: (index of v_k1, index of v_k2) into `detections`.
std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<LongConnection>> long_connections(
    std::span<const Detection> detections, std::span<const PointTrack> tracks, const GraphParams& params);

TrackingGraph build_graph(std::span<const Detection> detections, std::span<const PointTrack> tracks,
                          const GraphParams& params);

// One JSON object per vertex and per edge.
void dump_graph(std::ostream& out, const TrackingGraph& graph);

}  // namespace flowtrack
