#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "flowtrack/graph.hpp"
#include "flowtrack/model.hpp"
#include "flowtrack/solution.hpp"

namespace flowtrack {

struct WeightedGraph {
  Topology topology;
  std::vector<double> vertex_weight;  // f_detect per vertex
  std::vector<double> edge_weight;    // f_edge per edge
  double s_entry = 0.0;
};

// Evaluates every vertex and edge weight once.
WeightedGraph weigh(const ScoringModel& model, const TrackingGraph& graph);

// Score of a feasible solution from cached weights.
double score(const WeightedGraph& wg, const FeasibleSolution& x);

struct FlowArc {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double cost = 0.0;
  int capacity = 1;
};

// Node-split network: source 0, sink 1, vertex k -> in-node 2+2k and out-node 3+2k.
// Arcs, in order: per vertex (source->in, in->out, out->sink), then one arc per edge.
struct FlowNetwork {
  std::uint32_t n_nodes = 2;
  std::vector<FlowArc> arcs;

  static constexpr std::uint32_t source = 0;
  static constexpr std::uint32_t sink = 1;
  static std::uint32_t in_node(std::uint32_t k) { return 2 + 2 * k; }
  static std::uint32_t out_node(std::uint32_t k) { return 3 + 2 * k; }
};

FlowNetwork node_split(const WeightedGraph& wg);
void dump_network(std::ostream& out, const FlowNetwork& network);

enum class ShortestPathMode {
  LabelCorrecting,  // queue-based relaxation on the residual network
  Potentials,       // Dijkstra on reduced costs, potentials seeded by a DAG pass
};

struct SolveStats {
  std::vector<double> gains;  // score gain of each accepted augmenting path
};

// Maximum-score feasible solution by successive shortest augmenting paths. Stops when the
// best path has cost >= -1e-12.
FeasibleSolution solve(const WeightedGraph& wg, ShortestPathMode mode = ShortestPathMode::LabelCorrecting,
                       SolveStats* stats = nullptr);

class SizeGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

inline constexpr std::size_t kBruteForceMaxVertices = 14;

// Exhaustive enumeration of every feasible solution. Throws SizeGuardError above 14 vertices.
FeasibleSolution brute_force_solve(const WeightedGraph& wg);

}  // namespace flowtrack
