#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "flowtrack/graph.hpp"
#include "flowtrack/types.hpp"

namespace flowtrack {

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Binary indicators over a topology: vertex (true positive), first, last, and edge.
struct FeasibleSolution {
  std::vector<std::uint8_t> vertex;
  std::vector<std::uint8_t> first;
  std::vector<std::uint8_t> last;
  std::vector<std::uint8_t> edge;

  static FeasibleSolution empty(const Topology& topology);
  std::size_t n_tracks() const;

  friend bool operator==(const FeasibleSolution&, const FeasibleSolution&) = default;
};

// Flow conservation at every vertex: vertex = first + in = last + out, all binary.
bool check_feasible(const Topology& topology, const FeasibleSolution& x);

// Vertex chains (first -> ... -> last) of a feasible solution, ordered by first vertex.
// Throws ContractViolation when a chain does not terminate.
std::vector<std::vector<std::uint32_t>> solution_chains(const Topology& topology, const FeasibleSolution& x);

// Inverse of solution_chains. Throws ContractViolation when a link is not an edge.
FeasibleSolution solution_from_chains(const Topology& topology, const std::vector<std::vector<std::uint32_t>>& chains);

// One track per chain, entries in frame order, ids 1..n.
std::vector<OutputTrack> solution_to_tracks(const TrackingGraph& graph, const FeasibleSolution& x);

}  // namespace flowtrack
