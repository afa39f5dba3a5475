#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowtrack/types.hpp"

namespace flowtrack {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::int64_t record_id, const std::string& what)
      : std::runtime_error("record " + std::to_string(record_id) + ": " + what),
        record_id_(record_id) {}
  std::int64_t record_id() const { return record_id_; }

 private:
  std::int64_t record_id_;
};

// JSON-lines readers. `source` only labels error messages. Blank lines are skipped.
std::vector<Detection> read_detections(std::istream& in, const std::string& source = "<detections>");
std::vector<PointTrack> read_point_tracks(std::istream& in, const std::string& source = "<point-tracks>");
std::vector<GroundTruthTrack> read_ground_truth(std::istream& in, const std::string& source = "<ground-truth>");
// Output-track lines (ground-truth shape plus per-frame "boxes").
std::vector<OutputTrack> read_tracks(std::istream& in, const std::string& source = "<tracks>");

void write_detections(std::ostream& out, const std::vector<Detection>& detections);
void write_point_tracks(std::ostream& out, const std::vector<PointTrack>& tracks);
void write_ground_truth(std::ostream& out, const std::vector<GroundTruthTrack>& tracks);
void write_tracks(std::ostream& out, const std::vector<OutputTrack>& tracks);
// frame,track_id,x1,y1,w,h,1,-1,-1,-1
void write_mot_csv(std::ostream& out, const std::vector<OutputTrack>& tracks);

std::vector<Detection> read_detections_file(const std::filesystem::path& path);
std::vector<PointTrack> read_point_tracks_file(const std::filesystem::path& path);
std::vector<GroundTruthTrack> read_ground_truth_file(const std::filesystem::path& path);
std::vector<OutputTrack> read_tracks_file(const std::filesystem::path& path);

void write_detections_file(const std::filesystem::path& path, const std::vector<Detection>& detections);
void write_point_tracks_file(const std::filesystem::path& path, const std::vector<PointTrack>& tracks);
void write_ground_truth_file(const std::filesystem::path& path, const std::vector<GroundTruthTrack>& tracks);
void write_tracks_file(const std::filesystem::path& path, const std::vector<OutputTrack>& tracks);

// Per-type invariants. Throw ValidationError naming the offending record.
void validate(const std::vector<Detection>& detections);
void validate(const std::vector<PointTrack>& tracks);
void validate(const std::vector<GroundTruthTrack>& tracks, const std::vector<Detection>& detections);
void validate(const std::vector<OutputTrack>& tracks);

// Reads and cross-validates a detection file, a point-track file and an optional
// ground-truth file (empty path = absent).
Dataset read_dataset(const std::filesystem::path& detections,
                     const std::filesystem::path& point_tracks,
                     const std::filesystem::path& ground_truth = {});

// Ground-truth tracks derived from output-track records (non-interpolated detection ids).
std::vector<GroundTruthTrack> to_ground_truth(const std::vector<OutputTrack>& tracks);

}  // namespace flowtrack
