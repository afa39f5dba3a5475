#include "flowtrack/solver.hpp"

#include <deque>
#include <limits>
#include <ostream>
#include <queue>

#include <json.hpp>

namespace flowtrack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStopCost = -1e-12;

struct Residual {
  struct Arc {
    std::uint32_t to;
    std::uint32_t reverse;  // index of the paired arc
    double cost;
    int capacity;
  };

  std::vector<Arc> arcs;
  std::vector<std::vector<std::uint32_t>> adjacency;
  std::vector<std::uint32_t> tail;

  explicit Residual(const FlowNetwork& net) : adjacency(net.n_nodes) {
    arcs.reserve(2 * net.arcs.size());
    tail.reserve(2 * net.arcs.size());
    for (const auto& a : net.arcs) {
      const auto f = std::uint32_t(arcs.size());
      arcs.push_back({a.to, f + 1, a.cost, a.capacity});
      arcs.push_back({a.from, f, -a.cost, 0});
      tail.push_back(a.from);
      tail.push_back(a.to);
      adjacency[a.from].push_back(f);
      adjacency[a.to].push_back(f + 1);
    }
  }

  void push(std::uint32_t arc) {
    arcs[arc].capacity -= 1;
    arcs[arcs[arc].reverse].capacity += 1;
  }
};

// Returns predecessor arcs; the sink is unreachable when its entry is UINT32_MAX.
std::vector<std::uint32_t> label_correcting(const Residual& r, std::uint32_t source) {
  const std::size_t n = r.adjacency.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> pred(n, UINT32_MAX);
  std::vector<char> queued(n, 0);
  std::deque<std::uint32_t> queue{source};
  dist[source] = 0.0;
  queued[source] = 1;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    queued[u] = 0;
    for (auto a : r.adjacency[u]) {
      const auto& arc = r.arcs[a];
      if (arc.capacity <= 0) continue;
      const double d = dist[u] + arc.cost;
      if (d < dist[arc.to]) {
        dist[arc.to] = d;
        pred[arc.to] = a;
        if (!queued[arc.to]) {
          queued[arc.to] = 1;
          queue.push_back(arc.to);
        }
      }
    }
  }
  return pred;
}

// Shortest distances on the initial network, which is acyclic in node-index order
// (source, in_0, out_0, in_1, ..., sink last).
std::vector<double> dag_potentials(const FlowNetwork& net) {
  std::vector<std::vector<std::uint32_t>> incoming(net.n_nodes);
  for (std::uint32_t a = 0; a < net.arcs.size(); ++a) incoming[net.arcs[a].to].push_back(a);
  std::vector<double> pi(net.n_nodes, kInf);
  pi[FlowNetwork::source] = 0.0;
  auto relax = [&](std::uint32_t v) {
    for (auto a : incoming[v]) {
      const auto& arc = net.arcs[a];
      if (pi[arc.from] < kInf) pi[v] = std::min(pi[v], pi[arc.from] + arc.cost);
    }
  };
  for (std::uint32_t v = 2; v < net.n_nodes; ++v) relax(v);
  relax(FlowNetwork::sink);
  return pi;
}

std::vector<std::uint32_t> dijkstra(const Residual& r, std::uint32_t source, std::vector<double>& pi) {
  const std::size_t n = r.adjacency.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::uint32_t> pred(n, UINT32_MAX);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (done[u]) continue;
    done[u] = 1;
    for (auto a : r.adjacency[u]) {
      const auto& arc = r.arcs[a];
      if (arc.capacity <= 0 || pi[arc.to] == kInf) continue;
      const double reduced = std::max(0.0, arc.cost + pi[u] - pi[arc.to]);
      const double nd = d + reduced;
      if (nd < dist[arc.to]) {
        dist[arc.to] = nd;
        pred[arc.to] = a;
        heap.emplace(nd, arc.to);
      }
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (dist[v] < kInf) pi[v] += dist[v];
  }
  return pred;
}

}  // namespace

WeightedGraph weigh(const ScoringModel& model, const TrackingGraph& graph) {
  WeightedGraph wg;
  wg.topology = graph.topology;
  wg.s_entry = model.s_entry;
  std::vector<const DetectionFeatures*> vertices;
  vertices.reserve(graph.vertices.size());
  for (const auto& v : graph.vertices) vertices.push_back(&v.features);
  wg.vertex_weight.reserve(vertices.size());
  constexpr std::size_t kSlice = 8192;
  for (std::size_t begin = 0; begin < vertices.size(); begin += kSlice) {
    const auto part = std::span<const DetectionFeatures* const>(vertices).subspan(
        begin, std::min(kSlice, vertices.size() - begin));
    const auto s = detect_scores(model, pack_detections(part));
    wg.vertex_weight.insert(wg.vertex_weight.end(), s.data(), s.data() + s.size());
  }
  std::vector<const EdgeFeatures*> edges;
  edges.reserve(graph.edges.size());
  for (const auto& e : graph.edges) edges.push_back(&e.features);
  wg.edge_weight = edge_scores_chunked(model, edges, graph.scale());
  return wg;
}

double score(const WeightedGraph& wg, const FeasibleSolution& x) {
  if (!check_feasible(wg.topology, x)) throw ContractViolation("score of an infeasible solution");
  double s = 0.0;
  for (std::size_t k = 0; k < wg.topology.n_vertices; ++k) {
    if (x.first[k]) s += wg.s_entry;
    if (x.vertex[k]) s += wg.vertex_weight[k];
  }
  for (std::size_t e = 0; e < wg.topology.edges.size(); ++e) {
    if (x.edge[e]) s += wg.edge_weight[e];
  }
  return s;
}

FlowNetwork node_split(const WeightedGraph& wg) {
  FlowNetwork net;
  const auto n = std::uint32_t(wg.topology.n_vertices);
  net.n_nodes = 2 + 2 * n;
  net.arcs.reserve(3 * n + wg.topology.edges.size());
  for (std::uint32_t k = 0; k < n; ++k) {
    net.arcs.push_back({FlowNetwork::source, FlowNetwork::in_node(k), -wg.s_entry, 1});
    net.arcs.push_back({FlowNetwork::in_node(k), FlowNetwork::out_node(k), -wg.vertex_weight[k], 1});
    net.arcs.push_back({FlowNetwork::out_node(k), FlowNetwork::sink, 0.0, 1});
  }
  for (std::size_t e = 0; e < wg.topology.edges.size(); ++e) {
    const auto [from, to] = wg.topology.edges[e];
    net.arcs.push_back({FlowNetwork::out_node(from), FlowNetwork::in_node(to), -wg.edge_weight[e], 1});
  }
  return net;
}

void dump_network(std::ostream& out, const FlowNetwork& network) {
  out << nlohmann::json{{"nodes", network.n_nodes}, {"source", FlowNetwork::source}, {"sink", FlowNetwork::sink}}.dump()
      << '\n';
  for (const auto& a : network.arcs) {
    out << nlohmann::json{{"from", a.from}, {"to", a.to}, {"cost", a.cost}, {"capacity", a.capacity}}.dump() << '\n';
  }
}

FeasibleSolution solve(const WeightedGraph& wg, ShortestPathMode mode, SolveStats* stats) {
  const FlowNetwork net = node_split(wg);
  Residual r(net);
  std::vector<double> pi;
  if (mode == ShortestPathMode::Potentials) pi = dag_potentials(net);

  for (std::size_t iteration = 0; iteration <= wg.topology.n_vertices; ++iteration) {
    const auto pred = mode == ShortestPathMode::LabelCorrecting ? label_correcting(r, FlowNetwork::source)
                                                                : dijkstra(r, FlowNetwork::source, pi);
    if (pred[FlowNetwork::sink] == UINT32_MAX) break;
    double cost = 0.0;
    for (auto v = FlowNetwork::sink; v != FlowNetwork::source; v = r.tail[pred[v]]) cost += r.arcs[pred[v]].cost;
    if (cost >= kStopCost) break;
    for (auto v = FlowNetwork::sink; v != FlowNetwork::source; v = r.tail[pred[v]]) r.push(pred[v]);
    if (stats) stats->gains.push_back(-cost);
  }

  // Forward arc 2*i of the residual corresponds to network arc i; flow = 1 - capacity.
  auto x = FeasibleSolution::empty(wg.topology);
  const auto n = wg.topology.n_vertices;
  for (std::size_t k = 0; k < n; ++k) {
    x.first[k] = std::uint8_t(r.arcs[2 * (3 * k)].capacity == 0);
    x.vertex[k] = std::uint8_t(r.arcs[2 * (3 * k + 1)].capacity == 0);
    x.last[k] = std::uint8_t(r.arcs[2 * (3 * k + 2)].capacity == 0);
  }
  for (std::size_t e = 0; e < wg.topology.edges.size(); ++e) {
    x.edge[e] = std::uint8_t(r.arcs[2 * (3 * n + e)].capacity == 0);
  }
  return x;
}

namespace {

class Enumerator {
 public:
  explicit Enumerator(const WeightedGraph& wg)
      : wg_(wg), incoming_(wg.topology.incoming()), choice_(wg.topology.n_vertices, kUnused),
        best_choice_(choice_), open_(wg.topology.n_vertices, 0) {}

  FeasibleSolution run() {
    best_ = 0.0;  // the empty solution
    visit(0, 0.0);
    auto x = FeasibleSolution::empty(wg_.topology);
    for (std::size_t k = 0; k < best_choice_.size(); ++k) {
      const auto c = best_choice_[k];
      if (c == kUnused) continue;
      x.vertex[k] = 1;
      if (c == kStart) {
        x.first[k] = 1;
      } else {
        x.edge[std::size_t(c)] = 1;
      }
    }
    for (std::size_t k = 0; k < x.vertex.size(); ++k) x.last[k] = x.vertex[k];
    for (std::size_t e = 0; e < x.edge.size(); ++e) {
      if (x.edge[e]) x.last[wg_.topology.edges[e].first] = 0;
    }
    return x;
  }

 private:
  static constexpr std::int64_t kUnused = -2;
  static constexpr std::int64_t kStart = -1;

  void visit(std::size_t k, double score) {
    if (k == choice_.size()) {
      if (score > best_) {
        best_ = score;
        best_choice_ = choice_;
      }
      return;
    }
    choice_[k] = kUnused;
    visit(k + 1, score);

    open_[k] = 1;
    choice_[k] = kStart;
    visit(k + 1, score + wg_.s_entry + wg_.vertex_weight[k]);
    for (auto e : incoming_[k]) {
      const auto u = wg_.topology.edges[e].first;
      if (!open_[u]) continue;
      open_[u] = 0;
      choice_[k] = std::int64_t(e);
      visit(k + 1, score + wg_.edge_weight[e] + wg_.vertex_weight[k]);
      open_[u] = 1;
    }
    open_[k] = 0;
    choice_[k] = kUnused;
  }

  const WeightedGraph& wg_;
  std::vector<std::vector<std::uint32_t>> incoming_;
  std::vector<std::int64_t> choice_;
  std::vector<std::int64_t> best_choice_;
  std::vector<char> open_;
  double best_ = 0.0;
};

}  // namespace

FeasibleSolution brute_force_solve(const WeightedGraph& wg) {
  if (wg.topology.n_vertices > kBruteForceMaxVertices) {
    throw SizeGuardError("brute force is limited to " + std::to_string(kBruteForceMaxVertices) + " vertices");
  }
  for (const auto& [from, to] : wg.topology.edges) {
    if (from >= to) throw ContractViolation("edges must point forward in vertex order");
  }
  return Enumerator(wg).run();
}

}  // namespace flowtrack
