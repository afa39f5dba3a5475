#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "flowtrack/graph.hpp"

using namespace flowtrack;
using fixtures::straight_chain;

namespace {

PointTrack line_track(TrackId id, Frame t0, Frame t1, double x0, double y0, double vx, double vy) {
  PointTrack t{id, {}};
  for (Frame f = t0; f <= t1; ++f) t.points.push_back({f, x0 + vx * double(f - t0), y0 + vy * double(f - t0), 1.0});
  return t;
}

GraphParams params_for_tests() {
  GraphParams p = GraphParams::for_fps(10, 1000.0);
  return p;
}

}  // namespace

TEST(GraphParams, DerivedValuesForFps) {
  const auto p = GraphParams::for_fps(60, 2000.0);
  EXPECT_EQ(p.r_neighbours, 5);
  EXPECT_EQ(p.t_max, 180);
  EXPECT_EQ(p.n_velest, 30);
  EXPECT_EQ(p.n_project, 60);
  EXPECT_EQ(p.n_linpkt, 5);
  // fps/2 would drop below a line fit's two points
  EXPECT_EQ(GraphParams::for_fps(2, 1.0).n_velest, 2);
}

TEST(GraphParams, ValidateRejectsBadValues) {
  auto p = GraphParams::for_fps(10, 100.0);
  EXPECT_NO_THROW(p.validate());
  p.n_linpkt = 1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = GraphParams::for_fps(10, 100.0);
  p.t_max = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = GraphParams::for_fps(10, 100.0);
  p.image_diagonal = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(IntersectTracks, NeverInsideGivesEmpty) {
  std::vector<Detection> d = {{1, 0, {0, 0, 10, 10}, 1}};
  std::vector<PointTrack> t = {line_track(1, 0, 3, 50, 50, 1, 0)};
  const auto a = intersect_tracks(d, t);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_TRUE(a[0].empty());
}

TEST(IntersectTracks, FiveFramesFiveDetections) {
  const auto c = straight_chain(5);
  const auto a = intersect_tracks(c.detections, c.tracks);
  ASSERT_EQ(a[0].size(), 5u);
  for (std::uint32_t k = 0; k < 5; ++k) {
    EXPECT_EQ(a[0][k], k);
    const auto& p = c.tracks[0].points[k];
    EXPECT_TRUE(contains(c.detections[k].box, p.x, p.y));
  }
}

TEST(IntersectTracks, TwoOverlappingDetectionsInOneFrame) {
  std::vector<Detection> d = {{1, 0, {0, 0, 10, 10}, 1}, {2, 0, {5, 5, 15, 15}, 1}, {3, 1, {0, 0, 10, 10}, 1}};
  std::vector<PointTrack> t = {{1, {{0, 7, 7, 1}, {1, 7, 7, 1}}}};
  const auto a = intersect_tracks(d, t);
  EXPECT_EQ(a[0], (std::vector<std::uint32_t>{0, 1, 2}));
}

TEST(NeighbourPairs, SingleEntryHasNone) {
  std::vector<Frame> f = {3};
  EXPECT_TRUE(neighbour_pairs(f, 5, 30).empty());
}

TEST(NeighbourPairs, RankTwoOnFourFrames) {
  std::vector<Frame> f = {0, 1, 2, 3};
  const auto p = neighbour_pairs(f, 2, 100);
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(p, expected);
}

TEST(NeighbourPairs, CoFrameEntriesAreNotNeighbours) {
  std::vector<Frame> f = {0, 1, 1, 2};
  const auto p = neighbour_pairs(f, 5, 100);
  for (auto [a, b] : p) EXPECT_NE(f[a], f[b]);
  // each co-frame detection occupies one rank
  const auto r1 = neighbour_pairs(f, 1, 100);
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 1}, {2, 3}};
  EXPECT_EQ(r1, expected);
}

TEST(NeighbourPairs, GapBeyondTmaxExcluded) {
  std::vector<Frame> f = {0, 5, 40};
  const auto p = neighbour_pairs(f, 5, 30);
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 1}};
  EXPECT_EQ(p, expected);
}

TEST(Velocity, ExactLine) {
  std::vector<TrackPoint> pts;
  for (Frame t = 0; t < 6; ++t) pts.push_back({t, 2.0 * double(t), -double(t), 1});
  const auto v = fit_velocity(pts);
  EXPECT_NEAR(v.x, 2.0, 1e-12);
  EXPECT_NEAR(v.y, -1.0, 1e-12);
}

TEST(Velocity, Stationary) {
  std::vector<TrackPoint> pts = {{0, 3, 4, 1}, {1, 3, 4, 1}, {5, 3, 4, 1}};
  const auto v = fit_velocity(pts);
  EXPECT_DOUBLE_EQ(v.x, 0.0);
  EXPECT_DOUBLE_EQ(v.y, 0.0);
}

TEST(Velocity, NoisyLineMatchesNormalEquations) {
  Rng rng(11);
  std::vector<TrackPoint> pts;
  for (Frame t = 0; t < 9; ++t) pts.push_back({t * 2, 1.5 * double(t) + rng.normal(), 0.5 - 0.25 * double(t) + rng.normal(), 1});
  // normal equations [n, St; St, Stt] [b; a] = [Sx; Stx]
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  Eigen::Vector2d rx = Eigen::Vector2d::Zero(), ry = Eigen::Vector2d::Zero();
  for (const auto& p : pts) {
    const double t = double(p.frame);
    m(0, 0) += 1;
    m(0, 1) += t;
    m(1, 0) += t;
    m(1, 1) += t * t;
    rx += Eigen::Vector2d(p.x, t * p.x);
    ry += Eigen::Vector2d(p.y, t * p.y);
  }
  const Eigen::Vector2d sx = m.lu().solve(rx), sy = m.lu().solve(ry);
  const auto v = fit_velocity(pts);
  EXPECT_NEAR(v.x, sx(1), 1e-10);
  EXPECT_NEAR(v.y, sy(1), 1e-10);
}

TEST(Velocity, DegenerateInputs) {
  std::vector<TrackPoint> one = {{0, 0, 0, 1}};
  EXPECT_THROW(fit_velocity(one), DegenerateInputError);
  std::vector<TrackPoint> same = {{2, 0, 0, 1}, {2, 1, 1, 1}};
  EXPECT_THROW(fit_velocity(same), DegenerateInputError);
}

TEST(Velocity, PreAndPostWindows) {
  // x = t^2 so every window yields a distinct slope
  PointTrack t{1, {}};
  for (Frame f = 0; f <= 10; ++f) t.points.push_back({f, double(f * f), 0, 1});
  EXPECT_FALSE(pre_velocity(t, 2, 3).has_value());
  EXPECT_TRUE(pre_velocity(t, 3, 3).has_value());
  for (Frame at = 3; at <= 10; ++at) {
    std::vector<TrackPoint> window(t.points.begin() + (at - 3), t.points.begin() + at);
    EXPECT_NEAR(pre_velocity(t, at, 3)->x, fit_velocity(window).x, 1e-12) << at;
  }
  EXPECT_TRUE(post_velocity(t, 7, 3).has_value());
  EXPECT_FALSE(post_velocity(t, 8, 3).has_value());
  for (Frame at = 0; at <= 7; ++at) {
    std::vector<TrackPoint> window(t.points.begin() + at + 1, t.points.begin() + at + 4);
    EXPECT_NEAR(post_velocity(t, at, 3)->x, fit_velocity(window).x, 1e-12) << at;
  }
  const auto lin = line_track(2, 0, 10, 0, 0, 3, -2);
  EXPECT_NEAR(pre_velocity(lin, 6, 4)->x, 3.0, 1e-12);
  EXPECT_NEAR(post_velocity(lin, 2, 4)->y, -2.0, 1e-12);
}

TEST(DetectionFeatures, Examples) {
  const Detection a{1, 0, {0, 0, 2, 2}, 0.8};
  std::vector<Detection> alone = {a};
  EXPECT_EQ(detection_features(a, alone), (DetectionFeatures{0.8, 0, 0}));
  std::vector<Detection> dup = {a, {2, 0, {0, 0, 2, 2}, 0.1}};
  EXPECT_EQ(detection_features(a, dup), (DetectionFeatures{0.8, 1, 1}));
  std::vector<Detection> partial = {a, {2, 0, {1, 0, 3, 2}, 0.1}, {3, 0, {0, 0, 1, 1}, 0.1}};
  // iou: 1/3 and 1/4; ioa: 1/2 and 1/4
  EXPECT_EQ(detection_features(a, partial), (DetectionFeatures{0.8, 1.0 / 3.0, 0.5}));
}

TEST(KltConnection, TranslatesWithTrack) {
  const auto c = straight_chain(4);
  const auto k = klt_connection_features(c.tracks[0], c.detections[0], c.detections[3], 5);
  EXPECT_EQ(k.temporal_distance, 3);
  EXPECT_DOUBLE_EQ(k.translated_iou, 1.0);
  EXPECT_DOUBLE_EQ(k.min_confidence, 1.0);
  ASSERT_EQ(k.shape.size(), 5u);
  for (int s = 0; s < 5; ++s) {
    EXPECT_NEAR(k.shape[std::size_t(s)].x, 30.0 * s / 4.0, 1e-12);
    EXPECT_NEAR(k.shape[std::size_t(s)].y, 0.0, 1e-12);
  }
}

TEST(KltConnection, PiecewiseTrackResampling) {
  PointTrack t{9, {{0, 0, 0, 0.9}, {1, 4, 0, 0.4}, {2, 4, 6, 0.8}, {3, 0, 6, 0.95}}};
  const Detection a{1, 0, {-5, -5, 5, 5}, 1}, b{2, 3, {-5, 1, 5, 11}, 1};
  const auto k = klt_connection_features(t, a, b, 4);
  // samples at t = 0, 1, 2, 3
  const std::vector<Vec2> expected = {{0, 0}, {4, 0}, {4, 6}, {0, 6}};
  EXPECT_EQ(k.shape, expected);
  EXPECT_DOUBLE_EQ(k.min_confidence, 0.4);
  EXPECT_DOUBLE_EQ(k.translated_iou, 1.0);
  const auto k3 = klt_connection_features(t, a, b, 3);
  // t = 0, 1.5, 3: the midpoint of (4,0)-(4,6)
  EXPECT_NEAR(k3.shape[1].x, 4.0, 1e-12);
  EXPECT_NEAR(k3.shape[1].y, 3.0, 1e-12);
}

TEST(KltConnection, MinConfidenceOnlyOverSpan) {
  PointTrack t{1, {{0, 5, 5, 0.1}, {1, 5, 5, 0.9}, {2, 5, 5, 0.7}, {3, 5, 5, 0.05}}};
  const Detection a{1, 1, {0, 0, 10, 10}, 1}, b{2, 2, {0, 0, 10, 10}, 1};
  EXPECT_DOUBLE_EQ(klt_connection_features(t, a, b, 5).min_confidence, 0.7);
}

TEST(KltConnection, TranslationInvariance) {
  PointTrack t{1, {{0, 1, 2, 1}, {1, 3, 2.5, 1}, {2, 4, 4, 1}}};
  const Detection a{1, 0, {0, 0, 5, 5}, 1}, b{2, 2, {2, 1, 8, 7}, 1};
  const auto k = klt_connection_features(t, a, b, 5);
  PointTrack t2 = t;
  for (auto& p : t2.points) {
    p.x += 123.5;
    p.y -= 77.25;
  }
  const Detection a2{1, 0, a.box.translated(123.5, -77.25), 1}, b2{2, 2, b.box.translated(123.5, -77.25), 1};
  const auto k2 = klt_connection_features(t2, a2, b2, 5);
  EXPECT_EQ(k.temporal_distance, k2.temporal_distance);
  EXPECT_NEAR(k.translated_iou, k2.translated_iou, 1e-12);
  for (std::size_t s = 0; s < 5; ++s) {
    EXPECT_NEAR(k.shape[s].x, k2.shape[s].x, 1e-9);
    EXPECT_NEAR(k.shape[s].y, k2.shape[s].y, 1e-9);
  }
}

TEST(KltConnection, MissingEndpointThrows) {
  PointTrack t{1, {{0, 5, 5, 1}, {2, 5, 5, 1}}};
  const Detection a{1, 0, {0, 0, 10, 10}, 1}, b{2, 1, {0, 0, 10, 10}, 1};
  EXPECT_THROW(klt_connection_features(t, a, b, 5), std::invalid_argument);
}

TEST(LongConnections, ConstantVelocityPerfectDetector) {
  // box moves 4 px/frame; detections every frame, one track through them
  std::vector<Detection> d;
  for (Frame f = 0; f < 12; ++f) d.push_back({f + 1, f, {4.0 * double(f), 0, 4.0 * double(f) + 40, 80}, 1});
  std::vector<PointTrack> t = {line_track(1, 0, 11, 20, 40, 4, 0)};
  auto p = params_for_tests();
  p.n_velest = 3;
  p.n_project = 4;
  const auto longs = long_connections(d, t, p);
  ASSERT_FALSE(longs.empty());
  for (const auto& [key, list] : longs) {
    ASSERT_EQ(list.size(), 1u);
    const auto& c = list[0];
    EXPECT_EQ(c.temporal_distance, Frame(key.second - key.first));
    if (key.second - key.first <= 4 && c.temporal_distance == d[key.second].frame - d[key.first].frame)
      EXPECT_NEAR(c.predicted_iou, iou(d[key.first].box.translated(4.0 * double(c.temporal_distance), 0), d[key.second].box), 1e-12);
    EXPECT_NEAR(c.pre_velocity.x, 4.0, 1e-12);
  }
  // exact projection: the true successor at every step has predicted IoU 1
  for (std::uint32_t k = 3; k + 4 < 12; ++k)
    for (std::uint32_t dt = 1; dt <= 4; ++dt) EXPECT_NEAR(longs.at({k, k + dt}).front().predicted_iou, 1.0, 1e-12);
  // sources need n_velest points before them
  for (const auto& [key, list] : longs) EXPECT_GE(key.first, 3u);
}

TEST(LongConnections, NoHistoryNoConnections) {
  const auto c = straight_chain(3);
  auto p = params_for_tests();
  p.n_velest = 5;
  EXPECT_TRUE(long_connections(c.detections, c.tracks, p).empty());
}

TEST(LongConnections, TwoCandidateTargets) {
  std::vector<Detection> d = {{1, 0, {0, 0, 10, 10}, 1}, {2, 1, {2, 0, 12, 10}, 1}, {3, 2, {4, 0, 14, 10}, 1},
                              {4, 3, {6, 0, 16, 10}, 1}, {5, 3, {9, 0, 19, 10}, 1}};
  std::vector<PointTrack> t = {line_track(1, 0, 2, 5, 5, 2, 0)};
  auto p = params_for_tests();
  p.n_velest = 2;
  p.n_project = 1;
  const auto longs = long_connections(d, t, p);
  // from detection index 2 (frame 2) projected by v=(2,0): [6,0,16,10]
  ASSERT_TRUE(longs.count({2, 3}));
  ASSERT_TRUE(longs.count({2, 4}));
  const BoundingBox projected{6, 0, 16, 10};
  EXPECT_NEAR(longs.at({2, 3})[0].predicted_iou, iou(projected, d[3].box), 1e-12);
  EXPECT_NEAR(longs.at({2, 4})[0].predicted_iou, iou(projected, d[4].box), 1e-12);
  EXPECT_NE(longs.at({2, 3})[0].predicted_iou, longs.at({2, 4})[0].predicted_iou);
  // no post velocity for the targets: defaults to zero
  EXPECT_EQ(longs.at({2, 3})[0].median_post_velocity, (Vec2{0, 0}));
}

TEST(LongConnections, MedianPostVelocity) {
  std::vector<Detection> d = {{1, 0, {0, 0, 100, 100}, 1}, {2, 1, {0, 0, 100, 100}, 1}};
  std::vector<PointTrack> t = {line_track(1, 0, 3, 10, 10, 1, 0), line_track(2, 0, 3, 20, 20, 3, 1),
                               line_track(3, 0, 3, 30, 30, 8, 2)};
  auto p = params_for_tests();
  p.n_velest = 1 + 1;
  p.n_project = 1;
  // no pre velocity at frame 0, so build by hand through a track starting earlier
  t.push_back({4, {{-2, 50, 50, 1}, {-1, 50, 50, 1}, {0, 50, 50, 1}, {1, 50, 50, 1}}});
  const auto longs = long_connections(d, t, p);
  ASSERT_TRUE(longs.count({0, 1}));
  // post velocities after frame 1: x slopes 1, 3, 8 (track 4 has no points after frame 1)
  EXPECT_NEAR(longs.at({0, 1})[0].median_post_velocity.x, 3.0, 1e-12);
  EXPECT_NEAR(longs.at({0, 1})[0].median_post_velocity.y, 1.0, 1e-12);
}

TEST(BuildGraph, NoPointTracks) {
  const auto c = straight_chain(4);
  const auto g = build_graph(c.detections, {}, params_for_tests());
  EXPECT_EQ(g.vertices.size(), 4u);
  EXPECT_TRUE(g.edges.empty());
}

TEST(BuildGraph, SingleCleanObjectGivesChainPlusSkips) {
  const auto c = straight_chain(10);
  auto p = params_for_tests();
  p.n_velest = 100;  // no long connections
  const auto g = build_graph(c.detections, c.tracks, p);
  std::set<std::pair<std::uint32_t, std::uint32_t>> expected, got;
  for (std::uint32_t a = 0; a < 10; ++a)
    for (std::uint32_t b = a + 1; b < 10 && b <= a + 5; ++b) expected.insert({a, b});
  for (const auto& e : g.edges) got.insert({e.from, e.to});
  EXPECT_EQ(got, expected);
  for (const auto& e : g.edges) {
    EXPECT_EQ(e.features.klt.size(), 1u);
    EXPECT_TRUE(e.features.long_range.empty());
  }
}

TEST(BuildGraph, KltAndLongShareOneEdge) {
  const auto c = straight_chain(12);
  auto p = params_for_tests();
  p.n_velest = 3;
  p.n_project = 3;
  const auto g = build_graph(c.detections, c.tracks, p);
  bool both = false;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& e : g.edges) {
    EXPECT_TRUE(seen.insert({e.from, e.to}).second);
    both = both || (!e.features.klt.empty() && !e.features.long_range.empty());
  }
  EXPECT_TRUE(both);
}

TEST(BuildGraph, InvariantsOnCrossingFixture) {
  const auto s = crossing_fixture();
  const auto g = build_graph(s.detections, s.point_tracks, s.params);
  const auto a = intersect_tracks(std::span<const Detection>(), s.point_tracks);
  (void)a;
  const auto longs = long_connections(
      [&] {
        std::vector<Detection> v;
        for (const auto& x : g.vertices) v.push_back(x.detection);
        return v;
      }(),
      s.point_tracks, s.params);
  for (std::size_t k = 1; k < g.vertices.size(); ++k) {
    const auto& p = g.vertices[k - 1].detection;
    const auto& q = g.vertices[k].detection;
    EXPECT_TRUE(p.frame < q.frame || (p.frame == q.frame && p.id < q.id));
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& edge = g.edges[e];
    const auto& from = g.vertices[edge.from].detection;
    const auto& to = g.vertices[edge.to].detection;
    EXPECT_LT(edge.from, edge.to);
    EXPECT_GT(to.frame, from.frame);
    EXPECT_LE(to.frame - from.frame, std::max(s.params.t_max, s.params.n_project));
    EXPECT_FALSE(edge.features.klt.empty() && edge.features.long_range.empty());
    if (e > 0) EXPECT_LT(std::make_pair(g.edges[e - 1].from, g.edges[e - 1].to), std::make_pair(edge.from, edge.to));
    // |P| recounted: tracks with points inside both boxes
    std::size_t shared = 0;
    for (const auto& t : s.point_tracks) {
      bool in_from = false, in_to = false;
      for (const auto& pt : t.points) {
        if (pt.frame == from.frame && contains(from.box, pt.x, pt.y)) in_from = true;
        if (pt.frame == to.frame && contains(to.box, pt.x, pt.y)) in_to = true;
      }
      shared += in_from && in_to;
    }
    EXPECT_EQ(edge.features.klt.size(), shared);
    auto it = longs.find({edge.from, edge.to});
    EXPECT_EQ(edge.features.long_range.size(), it == longs.end() ? 0u : it->second.size());
    EXPECT_EQ(g.topology.find_edge(edge.from, edge.to), std::optional<std::uint32_t>(std::uint32_t(e)));
  }
}

TEST(BuildGraph, Deterministic) {
  const auto s = crossing_fixture();
  std::vector<Detection> shuffled(s.detections.rbegin(), s.detections.rend());
  const auto g1 = build_graph(s.detections, s.point_tracks, s.params);
  const auto g2 = build_graph(shuffled, s.point_tracks, s.params);
  std::ostringstream a, b;
  dump_graph(a, g1);
  dump_graph(b, g2);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_FALSE(a.str().empty());
}

TEST(BuildGraph, ContainsLongConnectionAcrossOcclusion) {
  const auto f = fixtures::crossing_graph();
  // A is detected at frame 4, hidden at 5-6 and back at 7
  const auto& gt_a = f.scenario.gt[0].detections;
  const auto before = f.graph.vertex_of(gt_a[4]).value();
  const auto after = f.graph.vertex_of(gt_a[5]).value();
  ASSERT_EQ(f.graph.vertices[before].detection.frame, 4);
  ASSERT_EQ(f.graph.vertices[after].detection.frame, 7);
  const auto e = f.graph.topology.find_edge(before, after);
  ASSERT_TRUE(e.has_value());
  EXPECT_FALSE(f.graph.edges[*e].features.long_range.empty());
}
