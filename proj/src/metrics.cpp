#include "flowtrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "flowtrack/assignment.hpp"
#include "flowtrack/geometry.hpp"

namespace flowtrack {
namespace {

struct Box {
  TrackId id;
  BoundingBox box;
};

using PerFrame = std::map<Frame, std::vector<Box>>;

PerFrame by_frame(std::span<const OutputTrack> tracks) {
  PerFrame out;
  for (const auto& t : tracks) {
    Frame prev = std::numeric_limits<Frame>::min();
    for (const auto& e : t.entries) {
      if (e.frame <= prev) throw std::invalid_argument("track " + std::to_string(t.track_id) + " repeats a frame");
      prev = e.frame;
      out[e.frame].push_back({t.track_id, e.box});
    }
  }
  return out;
}

}  // namespace

MotReport evaluate(std::span<const OutputTrack> gt, std::span<const OutputTrack> hyp, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw std::invalid_argument("iou threshold must be in (0,1]");
  const auto gt_frames = by_frame(gt);
  const auto hyp_frames = by_frame(hyp);
  MotReport r;
  r.gt_tracks = gt.size();

  std::map<Frame, bool> all_frames;
  for (const auto& [f, _] : gt_frames) all_frames[f];
  for (const auto& [f, _] : hyp_frames) all_frames[f];

  std::unordered_map<TrackId, TrackId> previous_frame;  // matches of the previous evaluated frame
  std::unordered_map<TrackId, TrackId> last_match;      // most recent match of each gt track
  std::unordered_map<TrackId, std::size_t> matched_frames, total_frames;
  std::unordered_map<TrackId, int> state;  // 0 never tracked, 1 tracked, 2 lost after being tracked
  double iou_sum = 0.0;
  static const std::vector<Box> none;

  for (const auto& [frame, _] : all_frames) {
    const auto git = gt_frames.find(frame);
    const auto hit = hyp_frames.find(frame);
    const auto& g = git == gt_frames.end() ? none : git->second;
    const auto& h = hit == hyp_frames.end() ? none : hit->second;
    r.gt_boxes += g.size();
    r.hyp_boxes += h.size();

    std::vector<int> g_match(g.size(), -1);
    std::vector<char> h_taken(h.size(), 0);
    // Keep last frame's correspondences that are still valid.
    for (std::size_t i = 0; i < g.size(); ++i) {
      auto p = previous_frame.find(g[i].id);
      if (p == previous_frame.end()) continue;
      for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j].id == p->second && !h_taken[j] && iou(g[i].box, h[j].box) >= iou_threshold) {
          g_match[i] = int(j);
          h_taken[j] = 1;
          break;
        }
      }
    }
    std::vector<std::size_t> gi, hj;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g_match[i] < 0) gi.push_back(i);
    for (std::size_t j = 0; j < h.size(); ++j)
      if (!h_taken[j]) hj.push_back(j);
    if (!gi.empty() && !hj.empty()) {
      Eigen::MatrixXd cost(Eigen::Index(gi.size()), Eigen::Index(hj.size()));
      for (std::size_t a = 0; a < gi.size(); ++a) {
        for (std::size_t b = 0; b < hj.size(); ++b) {
          const double o = iou(g[gi[a]].box, h[hj[b]].box);
          cost(Eigen::Index(a), Eigen::Index(b)) = o >= iou_threshold ? 1.0 - o : 2.0;
        }
      }
      const auto m = solve_assignment(cost);
      for (std::size_t a = 0; a < gi.size(); ++a) {
        if (m[a] < 0 || cost(Eigen::Index(a), m[a]) > 1.0) continue;
        g_match[gi[a]] = int(hj[std::size_t(m[a])]);
        h_taken[hj[std::size_t(m[a])]] = 1;
      }
    }

    FrameMatches fm{frame, {}};
    std::unordered_map<TrackId, TrackId> current;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto gid = g[i].id;
      ++total_frames[gid];
      auto& st = state[gid];
      if (g_match[i] < 0) {
        ++r.fn;
        if (st == 1) st = 2;
        continue;
      }
      const auto& hb = h[std::size_t(g_match[i])];
      ++r.matches;
      ++matched_frames[gid];
      iou_sum += iou(g[i].box, hb.box);
      if (auto lm = last_match.find(gid); lm != last_match.end() && lm->second != hb.id) ++r.ids;
      last_match[gid] = hb.id;
      if (st == 2) ++r.frag;
      st = 1;
      current[gid] = hb.id;
      fm.pairs.emplace_back(gid, hb.id);
    }
    r.fp += std::size_t(std::count(h_taken.begin(), h_taken.end(), 0));
    std::sort(fm.pairs.begin(), fm.pairs.end());
    r.frames.push_back(std::move(fm));
    previous_frame = std::move(current);
  }

  r.mota = r.gt_boxes == 0 ? std::numeric_limits<double>::quiet_NaN()
                           : 1.0 - double(r.fn + r.fp + r.ids) / double(r.gt_boxes);
  r.motp = r.matches == 0 ? 0.0 : iou_sum / double(r.matches);
  for (const auto& t : gt) {
    const auto n = t.entries.size();
    if (n == 0) continue;
    const double ratio = double(matched_frames[t.track_id]) / double(n);
    if (ratio >= 0.8) ++r.mostly_tracked;
    if (ratio < 0.2) ++r.mostly_lost;
  }

  // Identity metrics: one trajectory-level assignment maximizing frames matched with IoU >= threshold.
  if (!gt.empty() && !hyp.empty()) {
    std::unordered_map<TrackId, std::size_t> gt_index, hyp_index;
    for (std::size_t i = 0; i < gt.size(); ++i) gt_index[gt[i].track_id] = i;
    for (std::size_t j = 0; j < hyp.size(); ++j) hyp_index[hyp[j].track_id] = j;
    Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(Eigen::Index(gt.size()), Eigen::Index(hyp.size()));
    for (const auto& [frame, g] : gt_frames) {
      auto hit = hyp_frames.find(frame);
      if (hit == hyp_frames.end()) continue;
      for (const auto& gb : g)
        for (const auto& hb : hit->second)
          if (iou(gb.box, hb.box) >= iou_threshold)
            overlap(Eigen::Index(gt_index[gb.id]), Eigen::Index(hyp_index[hb.id])) += 1.0;
    }
    const auto m = solve_assignment(-overlap);
    for (std::size_t i = 0; i < m.size(); ++i)
      if (m[i] >= 0) r.idtp += std::size_t(overlap(Eigen::Index(i), m[i]));
  }
  r.idp = r.hyp_boxes == 0 ? 0.0 : double(r.idtp) / double(r.hyp_boxes);
  r.idr = r.gt_boxes == 0 ? 0.0 : double(r.idtp) / double(r.gt_boxes);
  r.idf1 = r.gt_boxes + r.hyp_boxes == 0 ? 0.0 : 2.0 * double(r.idtp) / double(r.gt_boxes + r.hyp_boxes);
  return r;
}

void print_report(std::ostream& out, const MotReport& r) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4);
  out << "MOTA " << r.mota << "\nMOTP(IoU) " << r.motp << "\nIDF1 " << r.idf1 << "\nIDP " << r.idp << "\nIDR " << r.idr
      << "\nFP " << r.fp << "\nFN " << r.fn << "\nIDS " << r.ids << "\nFRAG " << r.frag << "\nMT " << r.mostly_tracked
      << "\nML " << r.mostly_lost << "\nGT_TRACKS " << r.gt_tracks << "\nGT_BOXES " << r.gt_boxes << "\n";
  out.flags(flags);
}

void write_summary(std::ostream& out, const MotReport& r) {
  nlohmann::json j = {{"mota", std::isnan(r.mota) ? nlohmann::json(nullptr) : nlohmann::json(r.mota)},
                      {"motp_iou", r.motp},
                      {"idf1", r.idf1},
                      {"idp", r.idp},
                      {"idr", r.idr},
                      {"fp", r.fp},
                      {"fn", r.fn},
                      {"ids", r.ids},
                      {"frag", r.frag},
                      {"mt", r.mostly_tracked},
                      {"ml", r.mostly_lost},
                      {"gt_tracks", r.gt_tracks},
                      {"gt_boxes", r.gt_boxes},
                      {"hyp_boxes", r.hyp_boxes}};
  out << j.dump(2) << '\n';
}

}  // namespace flowtrack
