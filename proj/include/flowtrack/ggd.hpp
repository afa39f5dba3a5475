#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowtrack/graph.hpp"
#include "flowtrack/solution.hpp"
#include "flowtrack/types.hpp"

namespace flowtrack {

enum class PerturbationKind : int {
  IdSwitch,
  Split,
  Merge,
  SplitAndMerge,
  DoubleSplitAndMerge,
  DetectionSkip,
  SkipFirst,
  SkipLast,
  ExtraFirst,
  ExtraLast,
  FalsePositive,
  SplitToFalsePositive,
  SplitFromFalsePositive,
  TooShortTrack,
  ProperTrack,
};

inline constexpr std::size_t kPerturbationKinds = 15;

std::string_view kind_name(PerturbationKind kind);
// Throws std::invalid_argument for unknown names.
PerturbationKind kind_from_name(std::string_view name);

// Signed difference between a correct solution x* and an alternative x. Vertex and edge
// entries are indices into a feature source: the graph the solutions live on, or the
// pool of a GgdDataset.
struct Ggd {
  std::optional<PerturbationKind> kind;  // empty for differences not produced by the catalog
  std::vector<DetectionId> site;
  int entry_delta = 0;  // tracks started in x* minus tracks started in x
  std::vector<std::uint32_t> plus_vertices;
  std::vector<std::uint32_t> minus_vertices;
  std::vector<std::uint32_t> plus_edges;
  std::vector<std::uint32_t> minus_edges;

  bool empty() const {
    return entry_delta == 0 && plus_vertices.empty() && minus_vertices.empty() && plus_edges.empty() &&
           minus_edges.empty();
  }
  friend bool operator==(const Ggd&, const Ggd&) = default;
};

// Signed indicator difference. Throws ContractViolation if shapes disagree with the topology.
Ggd diff(const Topology& topology, const FeasibleSolution& x_star, const FeasibleSolution& x);

// Ground-truth solution on a graph.
struct GroundTruthSolution {
  FeasibleSolution solution;
  std::vector<std::string> events;  // one line per split or dropped detection
  std::size_t splits = 0;
};

// Identity matching: gt tracks reference detection ids. Ids missing from the graph are
// skipped; a link with no graph edge splits the track.
GroundTruthSolution ground_truth_solution(const TrackingGraph& graph, std::span<const GroundTruthTrack> gt);
// Box matching: per frame, gt boxes are assigned to detections maximizing IoU, pairs below
// `iou_threshold` discarded.
GroundTruthSolution ground_truth_solution(const TrackingGraph& graph, std::span<const OutputTrack> gt,
                                          double iou_threshold);

// One catalog modification applied to x*: the indicators it changes, with their new value.
struct SolutionDelta {
  enum class Term : std::uint8_t { Vertex, First, Last, Edge };
  struct Flip {
    Term term;
    std::uint32_t index;
    std::uint8_t value;
  };
  std::vector<Flip> flips;
};

FeasibleSolution apply_delta(const FeasibleSolution& x_star, const SolutionDelta& delta);

struct Perturbation {
  PerturbationKind kind;
  std::vector<DetectionId> site;
  SolutionDelta delta;
};

// Every applicable catalog modification of x*, sorted by (kind, site). Only deltas
// that keep the solution feasible are returned.
std::vector<Perturbation> enumerate_deltas(const TrackingGraph& graph, const FeasibleSolution& x_star);
// Same sites as GGDs (graph indices).
std::vector<Ggd> enumerate_perturbations(const TrackingGraph& graph, const FeasibleSolution& x_star);
// Too-short / proper track examples from non-overlapping subtracks of length n_minlen.
std::vector<Ggd> subtrack_examples(const TrackingGraph& graph, const FeasibleSolution& x_star, int n_minlen);

std::array<std::size_t, kPerturbationKinds> dataset_stats(std::span<const Ggd> ggds);

// Raw features referenced by a dataset's GGDs.
struct FeaturePool {
  FeatureScale scale;
  int n_linpkt = 5;
  std::vector<DetectionFeatures> vertices;
  std::vector<EdgeFeatures> edges;
};

struct GgdDataset {
  std::shared_ptr<const FeaturePool> pool;
  std::vector<Ggd> items;  // indices refer to *pool

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  // Copies the features the GGDs touch into a compact pool and reindexes them.
  static GgdDataset from_graph(const TrackingGraph& graph, std::span<const Ggd> ggds);
  // Concatenation; pools must share scale and n_linpkt.
  static GgdDataset concat(std::span<const GgdDataset> parts);
  // Same pool, selected items in the given order.
  GgdDataset select(std::span<const std::size_t> indices) const;
};

// JSON lines: a header, the pool's vertex and edge features, then one object per GGD.
void write_ggds(std::ostream& out, const GgdDataset& dataset);
GgdDataset read_ggds(std::istream& in, const std::string& source = "<stream>");
void write_ggds_file(const std::filesystem::path& path, const GgdDataset& dataset);
GgdDataset read_ggds_file(const std::filesystem::path& path);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};
void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest read_manifest(const std::filesystem::path& path);

}  // namespace flowtrack
