#include "flowtrack/graph.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <string>

#include <json.hpp>

namespace flowtrack {
namespace {

std::uint64_t edge_key(std::uint32_t from, std::uint32_t to) {
  return (std::uint64_t(from) << 32) | std::uint64_t(to);
}

bool by_frame_then_id(const Detection& a, const Detection& b) {
  return a.frame != b.frame ? a.frame < b.frame : a.id < b.id;
}

std::map<Frame, std::vector<std::uint32_t>> index_by_frame(std::span<const Detection> detections) {
  std::map<Frame, std::vector<std::uint32_t>> out;
  for (std::uint32_t k = 0; k < detections.size(); ++k) out[detections[k].frame].push_back(k);
  for (auto& [frame, ks] : out) {
    std::sort(ks.begin(), ks.end(),
              [&](std::uint32_t a, std::uint32_t b) { return detections[a].id < detections[b].id; });
  }
  return out;
}

// Index of the point at exactly frame t, if any.
std::optional<std::size_t> point_at(const PointTrack& track, Frame t) {
  auto it = std::lower_bound(track.points.begin(), track.points.end(), t,
                             [](const TrackPoint& p, Frame f) { return p.frame < f; });
  if (it == track.points.end() || it->frame != t) return std::nullopt;
  return std::size_t(it - track.points.begin());
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Tracks intersecting each detection, ascending track index.
std::vector<std::vector<std::uint32_t>> tracks_per_detection(
    std::size_t n_detections, const std::vector<std::vector<std::uint32_t>>& intersections) {
  std::vector<std::vector<std::uint32_t>> out(n_detections);
  for (std::uint32_t i = 0; i < intersections.size(); ++i) {
    for (auto k : intersections[i]) {
      if (out[k].empty() || out[k].back() != i) out[k].push_back(i);
    }
  }
  return out;
}

}  // namespace

GraphParams GraphParams::for_fps(int fps, double image_diagonal) {
  GraphParams p;
  p.fps = fps;
  p.t_max = 3 * Frame(fps);
  p.n_velest = std::max<Frame>(2, fps / 2);
  p.n_project = fps;
  p.image_diagonal = image_diagonal;
  return p;
}

void GraphParams::validate() const {
  if (r_neighbours < 1 || t_max < 1 || n_velest < 2 || n_project < 1 || n_linpkt < 2 || fps < 1 ||
      !(image_diagonal > 0.0)) {
    throw std::invalid_argument(
        "graph parameters must be positive with t_max>=1, n_velest>=2, n_linpkt>=2");
  }
}

std::optional<std::uint32_t> Topology::find_edge(std::uint32_t from, std::uint32_t to) const {
  auto it = lookup_.find(edge_key(from, to));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

void Topology::index() {
  lookup_.clear();
  lookup_.reserve(edges.size());
  for (std::uint32_t e = 0; e < edges.size(); ++e) lookup_.emplace(edge_key(edges[e].first, edges[e].second), e);
}

std::vector<std::vector<std::uint32_t>> Topology::outgoing() const {
  std::vector<std::vector<std::uint32_t>> out(n_vertices);
  for (std::uint32_t e = 0; e < edges.size(); ++e) out[edges[e].first].push_back(e);
  return out;
}

std::vector<std::vector<std::uint32_t>> Topology::incoming() const {
  std::vector<std::vector<std::uint32_t>> in(n_vertices);
  for (std::uint32_t e = 0; e < edges.size(); ++e) in[edges[e].second].push_back(e);
  return in;
}

std::optional<std::uint32_t> TrackingGraph::vertex_of(DetectionId id) const {
  auto it = vertex_lookup_.find(id);
  if (it == vertex_lookup_.end()) return std::nullopt;
  return it->second;
}

void TrackingGraph::rebuild_index() {
  vertex_lookup_.clear();
  for (std::uint32_t k = 0; k < vertices.size(); ++k) vertex_lookup_.emplace(vertices[k].detection.id, k);
  topology.n_vertices = vertices.size();
  topology.edges.clear();
  topology.edges.reserve(edges.size());
  for (const auto& e : edges) topology.edges.emplace_back(e.from, e.to);
  topology.index();
}

std::vector<std::vector<std::uint32_t>> intersect_tracks(std::span<const Detection> detections,
                                                         std::span<const PointTrack> tracks) {
  const auto by_frame = index_by_frame(detections);
  std::vector<std::vector<std::uint32_t>> out(tracks.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (const auto& p : tracks[i].points) {
      auto it = by_frame.find(p.frame);
      if (it == by_frame.end()) continue;
      for (auto k : it->second) {
        if (contains(detections[k].box, p.x, p.y)) out[i].push_back(k);
      }
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> neighbour_pairs(std::span<const Frame> frames, int r_neighbours,
                                                                 Frame t_max) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = frames.size();
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t last = std::min(n - 1, a + std::size_t(r_neighbours));
    for (std::size_t b = a + 1; b <= last && b < n; ++b) {
      const Frame gap = frames[b] - frames[a];
      if (gap > 0 && gap <= t_max) out.emplace_back(a, b);
    }
  }
  return out;
}

Vec2 fit_velocity(std::span<const TrackPoint> points) {
  if (points.size() < 2) throw DegenerateInputError("velocity fit needs at least two points");
  double mt = 0.0, mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mt += double(p.frame);
    mx += p.x;
    my += p.y;
  }
  const double n = double(points.size());
  mt /= n;
  mx /= n;
  my /= n;
  double stt = 0.0, stx = 0.0, sty = 0.0;
  for (const auto& p : points) {
    const double dt = double(p.frame) - mt;
    stt += dt * dt;
    stx += dt * (p.x - mx);
    sty += dt * (p.y - my);
  }
  if (stt == 0.0) throw DegenerateInputError("velocity fit over a single frame");
  return {stx / stt, sty / stt};
}

std::optional<Vec2> pre_velocity(const PointTrack& track, Frame t, Frame n_velest) {
  auto it = std::lower_bound(track.points.begin(), track.points.end(), t,
                             [](const TrackPoint& p, Frame f) { return p.frame < f; });
  const auto before = it - track.points.begin();
  if (before < n_velest) return std::nullopt;
  return fit_velocity(std::span<const TrackPoint>(&*(it - n_velest), std::size_t(n_velest)));
}

std::optional<Vec2> post_velocity(const PointTrack& track, Frame t, Frame n_velest) {
  auto it = std::upper_bound(track.points.begin(), track.points.end(), t,
                             [](Frame f, const TrackPoint& p) { return f < p.frame; });
  const auto after = track.points.end() - it;
  if (after < n_velest) return std::nullopt;
  return fit_velocity(std::span<const TrackPoint>(&*it, std::size_t(n_velest)));
}

Vec2 track_position(const PointTrack& track, double t) {
  const auto& pts = track.points;
  if (pts.empty()) throw DegenerateInputError("empty point track");
  if (t <= double(pts.front().frame)) return {pts.front().x, pts.front().y};
  if (t >= double(pts.back().frame)) return {pts.back().x, pts.back().y};
  auto hi = std::upper_bound(pts.begin(), pts.end(), t, [](double f, const TrackPoint& p) { return f < double(p.frame); });
  auto lo = hi - 1;
  const double span = double(hi->frame - lo->frame);
  const double w = (t - double(lo->frame)) / span;
  return {lo->x + w * (hi->x - lo->x), lo->y + w * (hi->y - lo->y)};
}

DetectionFeatures detection_features(const Detection& detection, std::span<const Detection> same_frame) {
  DetectionFeatures f{detection.confidence, 0.0, 0.0};
  for (const auto& other : same_frame) {
    if (other.id == detection.id) continue;
    f.max_iou = std::max(f.max_iou, iou(detection.box, other.box));
    f.max_ioa = std::max(f.max_ioa, ioa(detection.box, other.box));
  }
  return f;
}

KltConnection klt_connection_features(const PointTrack& track, const Detection& from, const Detection& to,
                                      int n_linpkt) {
  const auto j1 = point_at(track, from.frame);
  const auto j2 = point_at(track, to.frame);
  if (!j1 || !j2 || to.frame <= from.frame || n_linpkt < 2) {
    throw std::invalid_argument("point track " + std::to_string(track.id) +
                                " has no points at both connection endpoints");
  }
  const auto& p1 = track.points[*j1];
  const auto& p2 = track.points[*j2];
  KltConnection c;
  c.track_id = track.id;
  c.temporal_distance = to.frame - from.frame;
  c.min_confidence = p1.confidence;
  for (std::size_t j = *j1; j <= *j2; ++j) c.min_confidence = std::min(c.min_confidence, track.points[j].confidence);
  c.translated_iou = iou(from.box.translated(p2.x - p1.x, p2.y - p1.y), to.box);
  c.shape.reserve(std::size_t(n_linpkt));
  const double span = double(c.temporal_distance);
  for (int s = 0; s < n_linpkt; ++s) {
    const double t = double(from.frame) + span * double(s) / double(n_linpkt - 1);
    const Vec2 p = track_position(track, t);
    c.shape.push_back({p.x - p1.x, p.y - p1.y});
  }
  c.shape.front() = {0.0, 0.0};
  return c;
}

std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<LongConnection>> long_connections(
    std::span<const Detection> detections, std::span<const PointTrack> tracks, const GraphParams& params) {
  const auto by_frame = index_by_frame(detections);
  const auto per_detection = tracks_per_detection(detections.size(), intersect_tracks(detections, tracks));

  std::vector<Vec2> median_post(detections.size());
  for (std::size_t k = 0; k < detections.size(); ++k) {
    std::vector<double> vx, vy;
    for (auto i : per_detection[k]) {
      if (auto w = post_velocity(tracks[i], detections[k].frame, params.n_velest)) {
        vx.push_back(w->x);
        vy.push_back(w->y);
      }
    }
    if (!vx.empty()) median_post[k] = {median(vx), median(vy)};
  }

  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<LongConnection>> out;
  for (std::uint32_t k1 = 0; k1 < detections.size(); ++k1) {
    const auto& d1 = detections[k1];
    for (auto i : per_detection[k1]) {
      const auto w = pre_velocity(tracks[i], d1.frame, params.n_velest);
      if (!w) continue;
      for (Frame dt = 1; dt <= params.n_project; ++dt) {
        auto it = by_frame.find(d1.frame + dt);
        if (it == by_frame.end()) continue;
        const BoundingBox projected = d1.box.translated(w->x * double(dt), w->y * double(dt));
        for (auto k2 : it->second) {
          const double overlap = iou(projected, detections[k2].box);
          if (overlap <= 0.0) continue;
          out[{k1, k2}].push_back({dt, overlap, *w, median_post[k2]});
        }
      }
    }
  }
  return out;
}

TrackingGraph build_graph(std::span<const Detection> input, std::span<const PointTrack> tracks,
                          const GraphParams& params) {
  params.validate();
  std::vector<Detection> detections(input.begin(), input.end());
  std::sort(detections.begin(), detections.end(), by_frame_then_id);

  TrackingGraph graph;
  graph.params = params;
  graph.vertices.reserve(detections.size());
  {
    std::size_t begin = 0;
    while (begin < detections.size()) {
      std::size_t end = begin;
      while (end < detections.size() && detections[end].frame == detections[begin].frame) ++end;
      std::span<const Detection> frame(&detections[begin], end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        graph.vertices.push_back({detections[k], detection_features(detections[k], frame)});
      }
      begin = end;
    }
  }

  const auto intersections = intersect_tracks(detections, tracks);
  const auto per_detection = tracks_per_detection(detections.size(), intersections);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (const auto& a : intersections) {
    std::vector<Frame> frames;
    frames.reserve(a.size());
    for (auto k : a) frames.push_back(detections[k].frame);
    for (auto [p, q] : neighbour_pairs(frames, params.r_neighbours, params.t_max)) pairs.emplace_back(a[p], a[q]);
  }
  auto longs = long_connections(detections, tracks, params);
  for (const auto& [key, list] : longs) pairs.push_back(key);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  graph.edges.reserve(pairs.size());
  for (auto [k1, k2] : pairs) {
    GraphEdge edge;
    edge.from = k1;
    edge.to = k2;
    const auto& t1 = per_detection[k1];
    const auto& t2 = per_detection[k2];
    std::vector<std::uint32_t> shared;
    std::set_intersection(t1.begin(), t1.end(), t2.begin(), t2.end(), std::back_inserter(shared));
    for (auto i : shared) {
      edge.features.klt.push_back(klt_connection_features(tracks[i], detections[k1], detections[k2], params.n_linpkt));
    }
    if (auto it = longs.find({k1, k2}); it != longs.end()) edge.features.long_range = std::move(it->second);
    if (edge.features.klt.empty() && edge.features.long_range.empty()) continue;
    graph.edges.push_back(std::move(edge));
  }
  graph.rebuild_index();
  return graph;
}

void dump_graph(std::ostream& out, const TrackingGraph& graph) {
  using nlohmann::json;
  for (const auto& v : graph.vertices) {
    const auto& d = v.detection;
    out << json{{"vertex", d.id},
                {"frame", d.frame},
                {"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                {"features", {v.features.confidence, v.features.max_iou, v.features.max_ioa}}}
               .dump()
        << '\n';
  }
  for (const auto& e : graph.edges) {
    json klt = json::array();
    for (const auto& c : e.features.klt) {
      json shape = json::array();
      for (const auto& p : c.shape) shape.push_back({p.x, p.y});
      klt.push_back({{"track", c.track_id},
                     {"dt", c.temporal_distance},
                     {"min_conf", c.min_confidence},
                     {"iou", c.translated_iou},
                     {"shape", std::move(shape)}});
    }
    json lng = json::array();
    for (const auto& c : e.features.long_range) {
      lng.push_back({{"dt", c.temporal_distance},
                     {"iou", c.predicted_iou},
                     {"pre", {c.pre_velocity.x, c.pre_velocity.y}},
                     {"post", {c.median_post_velocity.x, c.median_post_velocity.y}}});
    }
    out << json{{"from", graph.vertices[e.from].detection.id},
                {"to", graph.vertices[e.to].detection.id},
                {"klt", std::move(klt)},
                {"long", std::move(lng)}}
               .dump()
        << '\n';
  }
}

}  // namespace flowtrack
