#include "flowtrack/io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace flowtrack {
namespace {

using nlohmann::json;

template <typename Fn>
void for_each_line(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
      fn(record);
    } catch (const json::exception& e) {
      throw ParseError(source, number, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, number, e.what());
    }
  }
}

BoundingBox parse_box(const json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1,y1,x2,y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

json box_json(const BoundingBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<Detection> read_detections(std::istream& in, const std::string& source) {
  std::vector<Detection> out;
  for_each_line(in, source, [&](const json& r) {
    Detection d;
    d.id = r.at("id").get<DetectionId>();
    d.frame = r.at("frame").get<Frame>();
    d.box = parse_box(r.at("box"));
    d.confidence = r.at("conf").get<double>();
    out.push_back(d);
  });
  validate(out);
  return out;
}

std::vector<PointTrack> read_point_tracks(std::istream& in, const std::string& source) {
  std::vector<PointTrack> out;
  for_each_line(in, source, [&](const json& r) {
    PointTrack t;
    t.id = r.at("id").get<TrackId>();
    for (const auto& p : r.at("points")) {
      if (!p.is_array() || p.size() != 4) throw std::invalid_argument("point must be [frame,x,y,conf]");
      t.points.push_back({p[0].get<Frame>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>()});
    }
    out.push_back(std::move(t));
  });
  validate(out);
  return out;
}

std::vector<GroundTruthTrack> read_ground_truth(std::istream& in, const std::string& source) {
  std::vector<GroundTruthTrack> out;
  for_each_line(in, source, [&](const json& r) {
    GroundTruthTrack t;
    t.track_id = r.at("track_id").get<TrackId>();
    t.detections = r.at("detections").get<std::vector<DetectionId>>();
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<OutputTrack> read_tracks(std::istream& in, const std::string& source) {
  std::vector<OutputTrack> out;
  for_each_line(in, source, [&](const json& r) {
    OutputTrack t;
    t.track_id = r.at("track_id").get<TrackId>();
    for (const auto& b : r.at("boxes")) {
      if (!b.is_array() || b.size() < 5) throw std::invalid_argument("box entry must be [frame,x1,y1,x2,y2,interpolated,detection]");
      TrackEntry e;
      e.frame = b[0].get<Frame>();
      e.box = {b[1].get<double>(), b[2].get<double>(), b[3].get<double>(), b[4].get<double>()};
      if (b.size() > 5) e.interpolated = b[5].get<int>() != 0;
      if (b.size() > 6) e.detection = b[6].get<DetectionId>();
      t.entries.push_back(e);
    }
    out.push_back(std::move(t));
  });
  validate(out);
  return out;
}

void write_detections(std::ostream& out, const std::vector<Detection>& detections) {
  for (const auto& d : detections) {
    json r = {{"id", d.id}, {"frame", d.frame}, {"box", box_json(d.box)}, {"conf", d.confidence}};
    out << r.dump() << '\n';
  }
}

void write_point_tracks(std::ostream& out, const std::vector<PointTrack>& tracks) {
  for (const auto& t : tracks) {
    json points = json::array();
    for (const auto& p : t.points) points.push_back(json::array({p.frame, p.x, p.y, p.confidence}));
    out << json{{"id", t.id}, {"points", std::move(points)}}.dump() << '\n';
  }
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruthTrack>& tracks) {
  for (const auto& t : tracks) {
    out << json{{"track_id", t.track_id}, {"detections", t.detections}}.dump() << '\n';
  }
}

void write_tracks(std::ostream& out, const std::vector<OutputTrack>& tracks) {
  for (const auto& t : tracks) {
    json ids = json::array();
    json boxes = json::array();
    for (const auto& e : t.entries) {
      if (e.detection != kNoDetection) ids.push_back(e.detection);
      boxes.push_back(json::array({e.frame, e.box.x1, e.box.y1, e.box.x2, e.box.y2,
                                   e.interpolated ? 1 : 0, e.detection}));
    }
    out << json{{"track_id", t.track_id}, {"detections", std::move(ids)}, {"boxes", std::move(boxes)}}.dump()
        << '\n';
  }
}

void write_mot_csv(std::ostream& out, const std::vector<OutputTrack>& tracks) {
  out.precision(17);
  for (const auto& t : tracks) {
    for (const auto& e : t.entries) {
      out << e.frame << ',' << t.track_id << ',' << e.box.x1 << ',' << e.box.y1 << ',' << e.box.width() << ','
          << e.box.height() << ",1,-1,-1,-1\n";
    }
  }
}

std::vector<Detection> read_detections_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_detections(in, path.string());
}
std::vector<PointTrack> read_point_tracks_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_point_tracks(in, path.string());
}
std::vector<GroundTruthTrack> read_ground_truth_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_ground_truth(in, path.string());
}
std::vector<OutputTrack> read_tracks_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tracks(in, path.string());
}

void write_detections_file(const std::filesystem::path& path, const std::vector<Detection>& detections) {
  auto out = open_out(path);
  write_detections(out, detections);
}
void write_point_tracks_file(const std::filesystem::path& path, const std::vector<PointTrack>& tracks) {
  auto out = open_out(path);
  write_point_tracks(out, tracks);
}
void write_ground_truth_file(const std::filesystem::path& path, const std::vector<GroundTruthTrack>& tracks) {
  auto out = open_out(path);
  write_ground_truth(out, tracks);
}
void write_tracks_file(const std::filesystem::path& path, const std::vector<OutputTrack>& tracks) {
  auto out = open_out(path);
  write_tracks(out, tracks);
}

void validate(const std::vector<Detection>& detections) {
  std::unordered_set<DetectionId> seen;
  for (const auto& d : detections) {
    if (!seen.insert(d.id).second) throw ValidationError(d.id, "duplicate detection id");
    if (d.frame < 0) throw ValidationError(d.id, "negative frame");
    if (!d.box.valid()) throw ValidationError(d.id, "box must satisfy x1<x2 and y1<y2");
  }
}

void validate(const std::vector<PointTrack>& tracks) {
  std::unordered_set<TrackId> seen;
  for (const auto& t : tracks) {
    if (!seen.insert(t.id).second) throw ValidationError(t.id, "duplicate point-track id");
    if (t.points.size() < 2) throw ValidationError(t.id, "point track needs at least two points");
    for (std::size_t j = 1; j < t.points.size(); ++j) {
      if (t.points[j].frame <= t.points[j - 1].frame)
        throw ValidationError(t.id, "point-track frames must strictly increase");
    }
  }
}

void validate(const std::vector<GroundTruthTrack>& tracks, const std::vector<Detection>& detections) {
  std::unordered_map<DetectionId, Frame> frame_of;
  for (const auto& d : detections) frame_of.emplace(d.id, d.frame);
  std::unordered_set<DetectionId> used;
  std::unordered_set<TrackId> ids;
  for (const auto& t : tracks) {
    if (!ids.insert(t.track_id).second) throw ValidationError(t.track_id, "duplicate ground-truth track id");
    Frame previous = -1;
    for (auto id : t.detections) {
      auto it = frame_of.find(id);
      if (it == frame_of.end()) throw ValidationError(t.track_id, "unknown detection " + std::to_string(id));
      if (!used.insert(id).second)
        throw ValidationError(t.track_id, "detection " + std::to_string(id) + " used by two tracks");
      if (it->second <= previous) throw ValidationError(t.track_id, "frames must strictly increase");
      previous = it->second;
    }
  }
}

void validate(const std::vector<OutputTrack>& tracks) {
  for (const auto& t : tracks) {
    for (std::size_t j = 0; j < t.entries.size(); ++j) {
      if (!t.entries[j].box.valid()) throw ValidationError(t.track_id, "invalid box");
      if (j > 0 && t.entries[j].frame <= t.entries[j - 1].frame)
        throw ValidationError(t.track_id, "frames must strictly increase");
    }
  }
}

Dataset read_dataset(const std::filesystem::path& detections, const std::filesystem::path& point_tracks,
                     const std::filesystem::path& ground_truth) {
  Dataset ds;
  ds.detections = read_detections_file(detections);
  ds.point_tracks = read_point_tracks_file(point_tracks);
  if (!ground_truth.empty()) {
    auto gt = read_ground_truth_file(ground_truth);
    validate(gt, ds.detections);
    ds.ground_truth = std::move(gt);
  }
  return ds;
}

std::vector<GroundTruthTrack> to_ground_truth(const std::vector<OutputTrack>& tracks) {
  std::vector<GroundTruthTrack> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) {
    GroundTruthTrack g{t.track_id, {}};
    for (const auto& e : t.entries) {
      if (!e.interpolated && e.detection != kNoDetection) g.detections.push_back(e.detection);
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace flowtrack
