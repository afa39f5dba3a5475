#include "flowtrack/pipeline.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "flowtrack/assignment.hpp"
#include "flowtrack/solution.hpp"

namespace flowtrack {
namespace {

std::vector<OutputTrack> restrict_to(std::span<const OutputTrack> tracks, std::pair<Frame, Frame> w) {
  std::vector<OutputTrack> out;
  for (const auto& t : tracks) {
    OutputTrack r{t.track_id, {}};
    for (const auto& e : t.entries)
      if (e.frame >= w.first && e.frame <= w.second && e.detection != kNoDetection) r.entries.push_back(e);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

ChunkPlan plan_chunks(Frame first_frame, Frame last_frame, Frame chunk_length, Frame overlap) {
  if (overlap < 0 || chunk_length <= overlap) throw std::invalid_argument("need chunk_length > overlap >= 0");
  ChunkPlan plan;
  plan.chunk_length = chunk_length;
  plan.overlap = overlap;
  if (last_frame < first_frame) return plan;
  const Frame stride = chunk_length - overlap;
  for (Frame start = first_frame;; start += stride) {
    const Frame end = std::min(start + chunk_length - 1, last_frame);
    plan.windows.emplace_back(start, end);
    if (end == last_frame) break;
  }
  return plan;
}

ChunkPlan plan_for(std::span<const Detection> detections, Frame chunk_length, Frame overlap) {
  if (detections.empty()) return plan_chunks(0, -1, chunk_length, overlap);
  auto [lo, hi] = std::minmax_element(detections.begin(), detections.end(),
                                      [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
  return plan_chunks(lo->frame, hi->frame, chunk_length, overlap);
}

TrackId IdMap::at(TrackId local) const {
  auto it = std::lower_bound(local_to_global.begin(), local_to_global.end(), std::pair<TrackId, TrackId>{local, 0},
                             [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it == local_to_global.end() || it->first != local) throw std::out_of_range("unknown local track id");
  return it->second;
}

IdMap stitch(std::span<const OutputTrack> previous, std::span<const OutputTrack> next,
             std::pair<Frame, Frame> overlap_window, TrackId& next_global_id) {
  const auto prev = restrict_to(previous, overlap_window);
  const auto nxt = restrict_to(next, overlap_window);
  std::unordered_map<DetectionId, std::size_t> owner;
  for (std::size_t i = 0; i < prev.size(); ++i)
    for (const auto& e : prev[i].entries) owner[e.detection] = i;

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(Eigen::Index(prev.size()), Eigen::Index(nxt.size()));
  for (std::size_t j = 0; j < nxt.size(); ++j)
    for (const auto& e : nxt[j].entries)
      if (auto it = owner.find(e.detection); it != owner.end()) cost(Eigen::Index(it->second), Eigen::Index(j)) -= 1.0;

  std::vector<std::int64_t> match(nxt.size(), -1);
  if (!prev.empty() && !nxt.empty()) {
    const auto rows = solve_assignment(cost);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (rows[i] >= 0 && cost(Eigen::Index(i), rows[i]) < 0.0) match[std::size_t(rows[i])] = std::int64_t(i);
  }

  IdMap map;
  for (std::size_t j = 0; j < next.size(); ++j) {
    TrackId global;
    if (match[j] >= 0) {
      global = previous[std::size_t(match[j])].track_id;
    } else {
      global = next_global_id++;
      map.fresh.push_back(global);
    }
    map.local_to_global.emplace_back(next[j].track_id, global);
  }
  std::sort(map.local_to_global.begin(), map.local_to_global.end());
  return map;
}

OutputTrack interpolate_track(const OutputTrack& track) {
  OutputTrack out{track.track_id, {}};
  for (std::size_t i = 0; i < track.entries.size(); ++i) {
    const auto& cur = track.entries[i];
    if (i > 0) {
      const auto& prev = track.entries[i - 1];
      if (cur.frame <= prev.frame) throw std::invalid_argument("track frames must strictly increase");
      const double span = double(cur.frame - prev.frame);
      for (Frame f = prev.frame + 1; f < cur.frame; ++f) {
        const double a = double(f - prev.frame) / span;
        auto lerp = [a](double p, double q) { return (1.0 - a) * p + a * q; };
        TrackEntry e;
        e.frame = f;
        e.box = {lerp(prev.box.x1, cur.box.x1), lerp(prev.box.y1, cur.box.y1), lerp(prev.box.x2, cur.box.x2),
                 lerp(prev.box.y2, cur.box.y2)};
        e.interpolated = true;
        e.detection = kNoDetection;
        out.entries.push_back(e);
      }
    }
    out.entries.push_back(cur);
  }
  return out;
}

std::vector<OutputTrack> track_window(std::span<const Detection> detections, std::span<const PointTrack> tracks,
                                      const ScoringModel& model, const GraphParams& params, ShortestPathMode mode) {
  if (detections.empty()) return {};
  const auto graph = build_graph(detections, tracks, params);
  const auto wg = weigh(model, graph);
  return solution_to_tracks(graph, solve(wg, mode));
}

std::vector<OutputTrack> track_sequence(std::span<const Detection> detections, std::span<const PointTrack> tracks,
                                        const ScoringModel& model, const GraphParams& params, const ChunkPlan& plan,
                                        const TrackingOptions& options) {
  std::map<TrackId, OutputTrack> global;
  TrackId next_id = 1;
  for (std::size_t c = 0; c < plan.windows.size(); ++c) {
    const auto [start, end] = plan.windows[c];
    std::vector<Detection> window;
    for (const auto& d : detections)
      if (d.frame >= start && d.frame <= end) window.push_back(d);
    const auto local = track_window(window, tracks, model, params, options.mode);

    std::vector<OutputTrack> current;
    for (const auto& [id, t] : global) current.push_back(t);
    const std::pair<Frame, Frame> overlap{start, c > 0 ? plan.windows[c - 1].second : start - 1};
    const auto map = stitch(current, local, overlap, next_id);

    std::unordered_set<DetectionId> claimed;
    for (const auto& t : local)
      for (const auto& e : t.entries) claimed.insert(e.detection);
    std::unordered_set<TrackId> continued;
    for (const auto& t : local) continued.insert(map.at(t.track_id));
    for (auto& [id, t] : global) {
      const bool cont = continued.contains(id);
      std::erase_if(t.entries,
                    [&](const TrackEntry& e) { return e.frame >= start && (cont || claimed.contains(e.detection)); });
    }
    for (const auto& t : local) {
      auto& g = global[map.at(t.track_id)];
      g.track_id = map.at(t.track_id);
      g.entries.insert(g.entries.end(), t.entries.begin(), t.entries.end());
    }
    std::erase_if(global, [](const auto& kv) { return kv.second.entries.empty(); });
  }

  std::vector<OutputTrack> out;
  TrackId id = 1;
  for (auto& [gid, t] : global) {
    std::sort(t.entries.begin(), t.entries.end(), [](const TrackEntry& a, const TrackEntry& b) { return a.frame < b.frame; });
    t.track_id = id++;
    out.push_back(options.interpolate ? interpolate_track(t) : std::move(t));
  }
  return out;
}

}  // namespace flowtrack
