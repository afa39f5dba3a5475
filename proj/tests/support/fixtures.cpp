#include "fixtures.hpp"

#include <stdexcept>

namespace flowtrack::fixtures {

WeightedGraph random_weighted_graph(Rng& rng, std::size_t n, double edge_probability) {
  WeightedGraph wg;
  wg.topology.n_vertices = n;
  for (std::uint32_t a = 0; a < n; ++a)
    for (std::uint32_t b = a + 1; b < n; ++b)
      if (rng.bernoulli(edge_probability)) wg.topology.edges.emplace_back(a, b);
  wg.topology.index();
  for (std::size_t v = 0; v < n; ++v) wg.vertex_weight.push_back(rng.uniform(-2.0, 2.0));
  for (std::size_t e = 0; e < wg.topology.edges.size(); ++e) wg.edge_weight.push_back(rng.uniform(-2.0, 2.0));
  wg.s_entry = rng.uniform(-2.0, 0.0);
  return wg;
}

Chain straight_chain(int n, DetectionId first_id, double y) {
  Chain c;
  PointTrack t{first_id, {}};
  for (int f = 0; f < n; ++f) {
    const double x = 100.0 + 10.0 * f;
    c.detections.push_back({first_id + f, f, {x, y, x + 40.0, y + 100.0}, 0.9});
    t.points.push_back({f, x + 20.0, y + 50.0, 1.0});
  }
  c.tracks.push_back(std::move(t));
  return c;
}

Architecture tiny_architecture() {
  Architecture a;
  a.det_layers = 1;
  a.det_features = 3;
  a.klt_layers = 1;
  a.klt_features = 4;
  a.long_layers = 1;
  a.long_features = 3;
  a.combine_layers = 1;
  a.combine_features = 5;
  return a;
}

ScoringModel hand_model() {
  Architecture a;
  a.det_layers = 0;
  a.klt_layers = 0;
  a.klt_features = 1;
  a.long_layers = 0;
  a.long_features = 1;
  a.combine_layers = 0;
  auto m = ScoringModel::zeros(a, -1.0);
  m.detect.layers()[0].weight(0, 0) = 20.0;
  m.detect.layers()[0].bias(0) = -10.0;
  // klt inputs: [dt/fps, min_conf, translated_iou, shape...]
  m.klt.layers()[0].weight(0, 0) = -1.0;
  m.klt.layers()[0].weight(0, 2) = 1.0;
  // long inputs: [dt/fps, predicted_iou, velocities...]
  m.long_range.layers()[0].weight(0, 0) = -1.0;
  m.long_range.layers()[0].weight(0, 1) = 1.0;
  // combine inputs: [klt, long, |P|, |C|]
  auto& c = m.combine.layers()[0];
  c.weight(0, 0) = 2.0;
  c.weight(0, 1) = 2.0;
  c.weight(0, 2) = 0.5;
  c.weight(0, 3) = 0.1;
  c.bias(0) = -2.5;
  m.check();
  return m;
}

FixtureGraph crossing_graph() {
  FixtureGraph f;
  f.scenario = crossing_fixture();
  f.graph = build_graph(f.scenario.detections, f.scenario.point_tracks, f.scenario.params);
  auto gt = ground_truth_solution(f.graph, f.scenario.gt);
  if (gt.splits != 0) throw std::logic_error("crossing fixture ground truth needs a split");
  f.truth = gt.solution;
  return f;
}

MotFixture hand_counted_mota() {
  auto box_at = [](double x, double y) { return BoundingBox{x, y, x + 10, y + 20}; };
  auto along = [&](TrackId id, Frame from, Frame to, double y) {
    OutputTrack t{id, {}};
    for (Frame f = from; f <= to; ++f) t.entries.push_back({f, box_at(5.0 * double(f), y), false, kNoDetection});
    return t;
  };
  MotFixture m;
  m.gt = {along(1, 0, 4, 0), along(2, 0, 4, 100)};
  // h12 follows gt 2 until frame 2, h13 takes over at frame 3, nobody at frame 4; h14 is a stray box
  m.hyp = {along(11, 0, 4, 0), along(12, 0, 2, 100), along(13, 3, 3, 100),
           OutputTrack{14, {{2, box_at(500, 500), false, kNoDetection}}}};
  return m;
}

TrackingGraph manual_graph(const std::vector<Frame>& frames,
                           const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges) {
  TrackingGraph g;
  g.params = GraphParams::for_fps(10, 1000.0);
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const double x = 50.0 * double(k);
    g.vertices.push_back({{DetectionId(k + 1), frames[k], {x, 0, x + 40, 100}, 0.5 + 0.01 * double(k)},
                          {0.5 + 0.01 * double(k), 0.1, 0.2}});
  }
  g.topology.n_vertices = frames.size();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [a, b] = edges[e];
    KltConnection c;
    c.track_id = TrackId(e + 1);
    c.temporal_distance = frames[b] - frames[a];
    c.min_confidence = 1.0;
    c.translated_iou = 1.0 / double(e + 2);
    for (int s = 0; s < g.params.n_linpkt; ++s) c.shape.push_back({double(s * e), double(s)});
    g.edges.push_back({a, b, EdgeFeatures{{c}, {}}});
    g.topology.edges.emplace_back(a, b);
  }
  g.topology.index();
  g.rebuild_index();
  return g;
}

std::vector<std::uint32_t> vertices_of(const TrackingGraph& graph, std::initializer_list<DetectionId> ids) {
  std::vector<std::uint32_t> out;
  for (auto id : ids) out.push_back(graph.vertex_of(id).value());
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("flowtrack_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace flowtrack::fixtures
