#include "flowtrack/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "flowtrack/io.hpp"
#include "flowtrack/random.hpp"

namespace flowtrack {
namespace {

// Independent generator per concern, so that e.g. changing the miss rate does not move the paths.
Rng stream(std::uint64_t seed, std::uint64_t which) { return Rng(seed * 0x9E3779B97F4A7C15ULL + which); }

struct Object {
  Frame start = 0;
  Frame end = 0;  // inclusive
  std::vector<BoundingBox> boxes;  // boxes[f - start]

  bool alive(Frame f) const { return f >= start && f <= end; }
  const BoundingBox& at(Frame f) const { return boxes[std::size_t(f - start)]; }
};

std::vector<Object> simulate_motion(const ScenarioConfig& c) {
  Rng rng = stream(c.seed, 1);
  Rng size_rng = stream(c.seed, 4);
  const double rho = std::exp(-1.0 / c.size_rate_time);
  const double innovation = c.size_rate_sigma * std::sqrt(1.0 - rho * rho);
  std::vector<Object> objects;
  for (int i = 0; i < c.n_objects; ++i) {
    Object o;
    const Frame max_life = std::min(c.max_lifetime, c.n_frames);
    const Frame min_life = std::min(c.min_lifetime, max_life);
    const Frame life = min_life + Frame(rng.index(std::uint64_t(max_life - min_life + 1)));
    o.start = Frame(rng.index(std::uint64_t(c.n_frames - life + 1)));
    o.end = o.start + life - 1;
    const double w = rng.uniform(c.min_box_width, c.max_box_width);
    const double h = w * rng.uniform(c.min_aspect, c.max_aspect);
    const double speed = rng.uniform(c.min_speed, c.max_speed);
    auto random_center = [&] {
      return Vec2{rng.uniform(w / 2, c.image_width - w / 2), rng.uniform(h / 2, c.image_height - h / 2)};
    };
    Vec2 p = random_center();
    Vec2 target = random_center();
    // log scale and its rate, per axis; the pull back keeps sizes near the initial ones
    double ls[2] = {0.0, 0.0}, rate[2] = {0.0, 0.0};
    for (Frame f = o.start; f <= o.end; ++f) {
      const double bw = w * std::exp(ls[0]) / 2, bh = h * std::exp(ls[1]) / 2;
      o.boxes.push_back({p.x - bw, p.y - bh, p.x + bw, p.y + bh});
      for (int k = 0; k < 2; ++k) {
        rate[k] = rho * rate[k] + innovation * size_rng.normal() - ls[k] / (c.size_rate_time * c.size_rate_time);
        ls[k] += rate[k];
      }
      double step = speed;
      while (step > 0.0) {
        const double dx = target.x - p.x, dy = target.y - p.y;
        const double dist = std::hypot(dx, dy);
        if (dist <= step) {
          p = target;
          step -= dist;
          target = random_center();
        } else {
          p = {p.x + dx / dist * step, p.y + dy / dist * step};
          step = 0.0;
        }
      }
    }
    objects.push_back(std::move(o));
  }
  return objects;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

void ScenarioConfig::validate() const {
  auto rate = [](double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
  };
  rate(miss_rate, "miss_rate");
  rate(jump_rate, "jump_rate");
  rate(jump_iou, "jump_iou");
  rate(min_true_confidence, "min_true_confidence");
  rate(max_false_confidence, "max_false_confidence");
  if (n_objects < 0 || n_frames < 1 || !(image_width > 0) || !(image_height > 0) || fps < 1)
    throw std::invalid_argument("scenario sizes must be positive");
  if (!(min_speed >= 0 && max_speed >= min_speed)) throw std::invalid_argument("bad speed range");
  if (!(min_box_width > 0 && max_box_width >= min_box_width && max_box_width < image_width))
    throw std::invalid_argument("bad box width range");
  if (!(min_aspect > 0 && max_aspect >= min_aspect && max_box_width * max_aspect < image_height))
    throw std::invalid_argument("bad aspect range");
  if (!(size_rate_sigma >= 0) || !(size_rate_time > 0)) throw std::invalid_argument("bad size drift settings");
  if (min_lifetime < 1 || max_lifetime < min_lifetime) throw std::invalid_argument("bad lifetime range");
  if (!(false_positives_per_frame >= 0) || !(jitter_sigma >= 0) || !(jitter_time >= 0) || !(klt_noise >= 0))
    throw std::invalid_argument("noise levels must be non-negative");
  if (klt_per_object < 0 || !(klt_lifetime_mean >= 1)) throw std::invalid_argument("bad klt settings");
}

Scenario generate_scenario(const ScenarioConfig& c) {
  c.validate();
  Scenario s;
  s.params = c.graph_params();
  const auto objects = simulate_motion(c);

  for (std::size_t i = 0; i < objects.size(); ++i) {
    OutputTrack t{TrackId(i + 1), {}};
    for (Frame f = objects[i].start; f <= objects[i].end; ++f) t.entries.push_back({f, objects[i].at(f), false, kNoDetection});
    s.gt_boxes.push_back(std::move(t));
    s.gt.push_back({TrackId(i + 1), {}});
  }

  Rng det_rng = stream(c.seed, 2);
  // per-object box error, AR(1) in time with stationary sd jitter_sigma
  const double jit_rho = c.jitter_time > 0 ? std::exp(-1.0 / c.jitter_time) : 0.0;
  const double jit_innovation = std::sqrt(1.0 - jit_rho * jit_rho);
  std::vector<std::array<double, 4>> jit(objects.size());
  DetectionId next_det = 1;
  for (Frame f = 0; f < c.n_frames; ++f) {
    for (std::size_t i = 0; i < objects.size(); ++i) {
      if (!objects[i].alive(f)) continue;
      const bool missed = det_rng.bernoulli(c.miss_rate);
      const bool first = f == objects[i].start;
      for (auto& v : jit[i]) v = first ? det_rng.normal() : jit_rho * v + jit_innovation * det_rng.normal();
      BoundingBox b = objects[i].at(f);
      const auto& j = jit[i];
      b = {b.x1 + c.jitter_sigma * j[0], b.y1 + c.jitter_sigma * j[1], b.x2 + c.jitter_sigma * j[2],
           b.y2 + c.jitter_sigma * j[3]};
      const double conf = det_rng.uniform(c.min_true_confidence, 1.0);
      if (missed) continue;
      if (b.x2 <= b.x1) std::swap(b.x1, b.x2);
      if (b.y2 <= b.y1) std::swap(b.y1, b.y2);
      s.detections.push_back({next_det, f, b, conf});
      s.gt[i].detections.push_back(next_det);
      s.gt_boxes[i].entries[std::size_t(f - objects[i].start)].detection = next_det;
      ++next_det;
    }
    const auto n_fp = det_rng.poisson(c.false_positives_per_frame);
    for (std::uint64_t k = 0; k < n_fp; ++k) {
      const double w = det_rng.uniform(c.min_box_width, c.max_box_width);
      const double h = w * det_rng.uniform(c.min_aspect, c.max_aspect);
      const double x = det_rng.uniform(0.0, c.image_width - w);
      const double y = det_rng.uniform(0.0, c.image_height - h);
      const double conf = det_rng.uniform(0.0, c.max_false_confidence);
      s.detections.push_back({next_det++, f, {x, y, x + w, y + h}, conf});
    }
  }

  // Feature points: klt_per_object slots per object, each carrying a sequence of tracks.
  Rng klt_rng = stream(c.seed, 3);
  struct Slot {
    std::size_t owner;
    std::size_t host;
    double u, v;
    bool active = false;
    std::size_t track = 0;              // index into `tracks`
    std::set<std::size_t> overlapping;  // objects currently in an occlusion episode with the host
  };
  std::vector<PointTrack> tracks;
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < objects.size(); ++i)
    for (int k = 0; k < c.klt_per_object; ++k) slots.push_back({i, i, 0.0, 0.0, false, 0, {}});
  TrackId next_track = 1;
  const double end_prob = 1.0 / c.klt_lifetime_mean;

  for (Frame f = 0; f < c.n_frames; ++f) {
    for (auto& slot : slots) {
      const auto& owner = objects[slot.owner];
      if (slot.active && !objects[slot.host].alive(f)) slot.active = false;
      if (!slot.active) {
        if (!owner.alive(f)) continue;
        tracks.push_back({next_track++, {}});
        slot.track = tracks.size() - 1;
        slot.active = true;
        slot.host = slot.owner;
        slot.u = klt_rng.uniform(0.15, 0.85);
        slot.v = klt_rng.uniform(0.15, 0.85);
        slot.overlapping.clear();
      } else {
        const auto& host_box = objects[slot.host].at(f);
        std::set<std::size_t> now;
        for (std::size_t j = 0; j < objects.size(); ++j)
          if (j != slot.host && objects[j].alive(f) && iou(host_box, objects[j].at(f)) > c.jump_iou) now.insert(j);
        std::size_t jump_to = slot.host;
        for (auto j : now) {
          if (slot.overlapping.contains(j)) continue;
          if (klt_rng.bernoulli(c.jump_rate) && jump_to == slot.host) jump_to = j;
        }
        if (jump_to != slot.host) {
          const auto& last = tracks[slot.track].points.back();
          const auto& nb = objects[jump_to].at(f);
          slot.u = clamp01((last.x - nb.x1) / nb.width());
          slot.v = clamp01((last.y - nb.y1) / nb.height());
          slot.host = jump_to;
          now.clear();
          for (std::size_t j = 0; j < objects.size(); ++j)
            if (j != slot.host && objects[j].alive(f) && iou(nb, objects[j].at(f)) > c.jump_iou) now.insert(j);
        }
        slot.overlapping = std::move(now);
      }
      const auto& b = objects[slot.host].at(f);
      const double conf = klt_rng.uniform(0.7, 1.0);
      tracks[slot.track].points.push_back({f, b.x1 + slot.u * b.width() + c.klt_noise * klt_rng.normal(),
                                    b.y1 + slot.v * b.height() + c.klt_noise * klt_rng.normal(), conf});
      if (klt_rng.bernoulli(end_prob)) slot.active = false;
    }
  }
  for (auto& t : tracks)
    if (t.points.size() >= 2) s.point_tracks.push_back(std::move(t));
  return s;
}

Scenario crossing_fixture() {
  Scenario s;
  s.params = GraphParams::for_fps(4, std::hypot(640.0, 480.0));
  constexpr double w = 40.0, h = 100.0;
  auto box = [&](double x1, double y1) { return BoundingBox{x1, y1, x1 + w, y1 + h}; };
  // object -> (frame -> true box)
  std::vector<std::map<Frame, BoundingBox>> truth(4);
  for (Frame f = 0; f <= 11; ++f) {
    truth[0][f] = box(100 + 20.0 * double(f), 300);  // A, left to right
    truth[1][f] = box(320 - 20.0 * double(f), 300);  // B, right to left, in front of A
  }
  for (Frame f = 0; f <= 4; ++f) truth[2][f] = box(100 + 20.0 * double(f), 100);   // C leaves after frame 4
  for (Frame f = 6; f <= 11; ++f) truth[3][f] = box(100 + 20.0 * double(f), 100);  // E takes over C's path
  auto detected = [](std::size_t object, Frame f) {
    switch (object) {
      case 0: return f != 5 && f != 6;      // hidden behind B
      case 1: return f >= 2 && f <= 10;
      default: return true;
    }
  };
  struct Fp {
    Frame frame;
    BoundingBox box;
  };
  const std::vector<Fp> fps = {{1, box(302, 300)}, {9, box(292, 310)}, {11, box(100, 300)}};

  for (std::size_t i = 0; i < truth.size(); ++i) {
    s.gt_boxes.push_back({TrackId(i + 1), {}});
    s.gt.push_back({TrackId(i + 1), {}});
  }
  DetectionId next = 1;
  for (Frame f = 0; f <= 11; ++f) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
      auto it = truth[i].find(f);
      if (it == truth[i].end()) continue;
      DetectionId id = kNoDetection;
      if (detected(i, f)) {
        id = next++;
        s.detections.push_back({id, f, it->second, 0.9});
        s.gt[i].detections.push_back(id);
      }
      s.gt_boxes[i].entries.push_back({f, it->second, false, id});
    }
    for (const auto& fp : fps)
      if (fp.frame == f) s.detections.push_back({next++, f, fp.box, 0.3});
  }

  // Feature points as (object, u, v), optionally moving to another object from a given frame on.
  struct Point {
    std::size_t object;
    double u, v;
    std::size_t jump_object;
    Frame jump_frame;
  };
  constexpr Frame never = 1000;
  std::vector<Point> points;
  for (double v : {0.25, 0.75}) {
    points.push_back({0, 0.25, v, 0, never});
    points.push_back({0, 0.75, v, 1, 5});  // A is occluded: its right points land on B
    points.push_back({1, 0.75, v, 1, never});
    points.push_back({1, 0.25, v, 0, 7});  // A reappears: B's left points latch onto it
    for (double u : {0.25, 0.75}) {
      points.push_back({2, u, v, 2, never});
      points.push_back({3, u, v, 3, never});
    }
  }
  TrackId tid = 1;
  for (const auto& p : points) {
    PointTrack t{tid++, {}};
    for (Frame f = 0; f <= 11; ++f) {
      const std::size_t host = f >= p.jump_frame ? p.jump_object : p.object;
      auto it = truth[host].find(f);
      if (it == truth[host].end()) continue;
      const auto& b = it->second;
      t.points.push_back({f, b.x1 + p.u * b.width(), b.y1 + p.v * b.height(), 1.0});
    }
    s.point_tracks.push_back(std::move(t));
  }
  return s;
}

void write_scenario(const std::filesystem::path& directory, const Scenario& scenario) {
  std::filesystem::create_directories(directory);
  write_detections_file(directory / "detections.jsonl", scenario.detections);
  write_point_tracks_file(directory / "klt.jsonl", scenario.point_tracks);
  write_ground_truth_file(directory / "gt.jsonl", scenario.gt);
  write_tracks_file(directory / "gt_boxes.jsonl", scenario.gt_boxes);
}

}  // namespace flowtrack
