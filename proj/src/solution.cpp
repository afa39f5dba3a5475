#include "flowtrack/solution.hpp"

namespace flowtrack {

FeasibleSolution FeasibleSolution::empty(const Topology& topology) {
  FeasibleSolution x;
  x.vertex.assign(topology.n_vertices, 0);
  x.first.assign(topology.n_vertices, 0);
  x.last.assign(topology.n_vertices, 0);
  x.edge.assign(topology.edges.size(), 0);
  return x;
}

std::size_t FeasibleSolution::n_tracks() const {
  std::size_t n = 0;
  for (auto f : first) n += f;
  return n;
}

bool check_feasible(const Topology& topology, const FeasibleSolution& x) {
  const std::size_t n = topology.n_vertices;
  if (x.vertex.size() != n || x.first.size() != n || x.last.size() != n || x.edge.size() != topology.edges.size()) {
    return false;
  }
  std::vector<int> in(n, 0), out(n, 0);
  for (std::size_t e = 0; e < topology.edges.size(); ++e) {
    if (x.edge[e] > 1) return false;
    if (x.edge[e]) {
      ++out[topology.edges[e].first];
      ++in[topology.edges[e].second];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (x.vertex[k] > 1 || x.first[k] > 1 || x.last[k] > 1) return false;
    if (x.vertex[k] != x.first[k] + in[k]) return false;
    if (x.vertex[k] != x.last[k] + out[k]) return false;
  }
  return true;
}

std::vector<std::vector<std::uint32_t>> solution_chains(const Topology& topology, const FeasibleSolution& x) {
  if (!check_feasible(topology, x)) throw ContractViolation("solution is not feasible");
  std::vector<std::int64_t> next(topology.n_vertices, -1);
  for (std::size_t e = 0; e < topology.edges.size(); ++e) {
    if (x.edge[e]) next[topology.edges[e].first] = topology.edges[e].second;
  }
  std::vector<std::vector<std::uint32_t>> chains;
  std::size_t visited = 0;
  for (std::uint32_t k = 0; k < topology.n_vertices; ++k) {
    if (!x.first[k]) continue;
    std::vector<std::uint32_t> chain{k};
    std::int64_t v = next[k];
    while (v >= 0) {
      if (chain.size() > topology.n_vertices) throw ContractViolation("cycle in solution");
      chain.push_back(std::uint32_t(v));
      v = next[std::size_t(v)];
    }
    if (!x.last[chain.back()]) throw ContractViolation("chain does not end at a last vertex");
    visited += chain.size();
    chains.push_back(std::move(chain));
  }
  std::size_t used = 0;
  for (auto v : x.vertex) used += v;
  if (visited != used) throw ContractViolation("cycle in solution");
  return chains;
}

FeasibleSolution solution_from_chains(const Topology& topology, const std::vector<std::vector<std::uint32_t>>& chains) {
  auto x = FeasibleSolution::empty(topology);
  for (const auto& chain : chains) {
    if (chain.empty()) continue;
    x.first[chain.front()] = 1;
    x.last[chain.back()] = 1;
    for (std::size_t j = 0; j < chain.size(); ++j) {
      if (x.vertex[chain[j]]) throw ContractViolation("vertex used by two chains");
      x.vertex[chain[j]] = 1;
      if (j + 1 < chain.size()) {
        auto e = topology.find_edge(chain[j], chain[j + 1]);
        if (!e) throw ContractViolation("chain link is not a graph edge");
        x.edge[*e] = 1;
      }
    }
  }
  return x;
}

std::vector<OutputTrack> solution_to_tracks(const TrackingGraph& graph, const FeasibleSolution& x) {
  std::vector<OutputTrack> tracks;
  TrackId id = 1;
  for (const auto& chain : solution_chains(graph.topology, x)) {
    OutputTrack t{id++, {}};
    for (auto k : chain) {
      const auto& d = graph.vertices[k].detection;
      t.entries.push_back({d.frame, d.box, false, d.id});
    }
    tracks.push_back(std::move(t));
  }
  return tracks;
}

}  // namespace flowtrack
