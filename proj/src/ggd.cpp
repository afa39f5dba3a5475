#include "flowtrack/ggd.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "flowtrack/assignment.hpp"
#include "flowtrack/io.hpp"

namespace flowtrack {
namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kPerturbationKinds> kNames = {
    "IdSwitch",      "Split",         "Merge",          "SplitAndMerge",        "DoubleSplitAndMerge",
    "DetectionSkip", "SkipFirst",     "SkipLast",       "ExtraFirst",           "ExtraLast",
    "FalsePositive", "SplitToFalsePositive", "SplitFromFalsePositive", "TooShortTrack", "ProperTrack",
};

void check_shape(const Topology& t, const FeasibleSolution& x) {
  const auto n = t.n_vertices;
  if (x.vertex.size() != n || x.first.size() != n || x.last.size() != n || x.edge.size() != t.edges.size())
    throw ContractViolation("solution does not belong to this graph");
}

GroundTruthSolution chains_from_sequences(const TrackingGraph& graph,
                                          const std::vector<std::pair<TrackId, std::vector<std::uint32_t>>>& seqs) {
  GroundTruthSolution out;
  std::vector<std::uint8_t> taken(graph.vertices.size(), 0);
  std::vector<std::vector<std::uint32_t>> chains;
  for (const auto& [track_id, raw] : seqs) {
    auto seq = raw;
    std::sort(seq.begin(), seq.end());
    std::vector<std::uint32_t> chain;
    for (auto v : seq) {
      if (taken[v]) {
        out.events.push_back("track " + std::to_string(track_id) + ": detection " +
                             std::to_string(graph.vertices[v].detection.id) + " already used, skipped");
        continue;
      }
      if (!chain.empty() && !graph.topology.find_edge(chain.back(), v)) {
        out.events.push_back("track " + std::to_string(track_id) + ": no edge " +
                             std::to_string(graph.vertices[chain.back()].detection.id) + " -> " +
                             std::to_string(graph.vertices[v].detection.id) + ", split");
        ++out.splits;
        chains.push_back(std::move(chain));
        chain.clear();
      }
      taken[v] = 1;
      chain.push_back(v);
    }
    if (!chain.empty()) chains.push_back(std::move(chain));
  }
  out.solution = solution_from_chains(graph.topology, chains);
  return out;
}

// Collects target indicator values for one modification; only changes relative to x* are kept.
class DeltaBuilder {
 public:
  explicit DeltaBuilder(const FeasibleSolution& x) : x_(x) {}

  DeltaBuilder& vertex(std::uint32_t i, bool v) { return set(SolutionDelta::Term::Vertex, i, v); }
  DeltaBuilder& first(std::uint32_t i, bool v) { return set(SolutionDelta::Term::First, i, v); }
  DeltaBuilder& last(std::uint32_t i, bool v) { return set(SolutionDelta::Term::Last, i, v); }
  DeltaBuilder& edge(std::uint32_t i, bool v) { return set(SolutionDelta::Term::Edge, i, v); }

  SolutionDelta take() { return std::move(delta_); }

 private:
  DeltaBuilder& set(SolutionDelta::Term term, std::uint32_t i, bool v) {
    auto& flips = delta_.flips;
    flips.erase(std::remove_if(flips.begin(), flips.end(),
                               [&](const SolutionDelta::Flip& f) { return f.term == term && f.index == i; }),
                flips.end());
    if (current(term, i) != std::uint8_t(v)) flips.push_back({term, i, std::uint8_t(v)});
    return *this;
  }
  std::uint8_t current(SolutionDelta::Term term, std::uint32_t i) const {
    switch (term) {
      case SolutionDelta::Term::Vertex: return x_.vertex[i];
      case SolutionDelta::Term::First: return x_.first[i];
      case SolutionDelta::Term::Last: return x_.last[i];
      case SolutionDelta::Term::Edge: return x_.edge[i];
    }
    return 0;
  }

  const FeasibleSolution& x_;
  SolutionDelta delta_;
};

struct SolutionIndex {
  std::vector<int> in_count, out_count;
  std::vector<std::int64_t> pred, succ;  // x* edge index or -1
};

SolutionIndex index_solution(const Topology& t, const FeasibleSolution& x) {
  SolutionIndex s;
  s.in_count.assign(t.n_vertices, 0);
  s.out_count.assign(t.n_vertices, 0);
  s.pred.assign(t.n_vertices, -1);
  s.succ.assign(t.n_vertices, -1);
  for (std::size_t e = 0; e < t.edges.size(); ++e) {
    if (!x.edge[e]) continue;
    auto [a, b] = t.edges[e];
    ++s.out_count[a];
    ++s.in_count[b];
    s.succ[a] = std::int64_t(e);
    s.pred[b] = std::int64_t(e);
  }
  return s;
}

// Flow conservation re-checked only at the vertices a delta touches.
bool delta_feasible(const Topology& t, const FeasibleSolution& x, const SolutionIndex& s, const SolutionDelta& d) {
  struct Local {
    int vertex, first, last, in, out;
  };
  std::unordered_map<std::uint32_t, Local> touched;
  auto at = [&](std::uint32_t v) -> Local& {
    auto it = touched.find(v);
    if (it == touched.end())
      it = touched.emplace(v, Local{x.vertex[v], x.first[v], x.last[v], s.in_count[v], s.out_count[v]}).first;
    return it->second;
  };
  for (const auto& f : d.flips) {
    const int delta = int(f.value) - (f.value ? 0 : 1);  // +1 when switched on, -1 when off
    switch (f.term) {
      case SolutionDelta::Term::Vertex: at(f.index).vertex = f.value; break;
      case SolutionDelta::Term::First: at(f.index).first = f.value; break;
      case SolutionDelta::Term::Last: at(f.index).last = f.value; break;
      case SolutionDelta::Term::Edge: {
        auto [a, b] = t.edges[f.index];
        at(a).out += delta;
        at(b).in += delta;
        break;
      }
    }
  }
  for (const auto& [v, l] : touched) {
    if (l.in < 0 || l.in > 1 || l.out < 0 || l.out > 1) return false;
    if (l.vertex != l.first + l.in || l.vertex != l.last + l.out) return false;
  }
  return true;
}

Ggd ggd_from_delta(const Topology& t, const SolutionDelta& d, PerturbationKind kind, std::vector<DetectionId> site) {
  (void)t;
  Ggd g;
  g.kind = kind;
  g.site = std::move(site);
  for (const auto& f : d.flips) {
    // A flip to 0 removes a term of x*, a flip to 1 adds a term x* lacks.
    switch (f.term) {
      case SolutionDelta::Term::Vertex: (f.value ? g.minus_vertices : g.plus_vertices).push_back(f.index); break;
      case SolutionDelta::Term::Edge: (f.value ? g.minus_edges : g.plus_edges).push_back(f.index); break;
      case SolutionDelta::Term::First: g.entry_delta += f.value ? -1 : 1; break;
      case SolutionDelta::Term::Last: break;
    }
  }
  for (auto* v : {&g.plus_vertices, &g.minus_vertices, &g.plus_edges, &g.minus_edges}) std::sort(v->begin(), v->end());
  return g;
}

json edge_json(const EdgeFeatures& e) {
  json klt = json::array();
  for (const auto& c : e.klt) {
    json shape = json::array();
    for (const auto& p : c.shape) {
      shape.push_back(p.x);
      shape.push_back(p.y);
    }
    klt.push_back(json::array({c.track_id, c.temporal_distance, c.min_confidence, c.translated_iou, std::move(shape)}));
  }
  json lr = json::array();
  for (const auto& c : e.long_range) {
    lr.push_back(json::array({c.temporal_distance, c.predicted_iou, c.pre_velocity.x, c.pre_velocity.y,
                              c.median_post_velocity.x, c.median_post_velocity.y}));
  }
  return json{{"klt", std::move(klt)}, {"long", std::move(lr)}};
}

EdgeFeatures edge_from_json(const json& j) {
  EdgeFeatures e;
  for (const auto& c : j.at("klt")) {
    if (!c.is_array() || c.size() != 5) throw std::invalid_argument("klt connection must have 5 fields");
    KltConnection k;
    k.track_id = c[0].get<TrackId>();
    k.temporal_distance = c[1].get<Frame>();
    k.min_confidence = c[2].get<double>();
    k.translated_iou = c[3].get<double>();
    const auto& s = c[4];
    if (s.size() % 2 != 0) throw std::invalid_argument("klt shape needs an even number of coordinates");
    for (std::size_t i = 0; i < s.size(); i += 2) k.shape.push_back({s[i].get<double>(), s[i + 1].get<double>()});
    e.klt.push_back(std::move(k));
  }
  for (const auto& c : j.at("long")) {
    if (!c.is_array() || c.size() != 6) throw std::invalid_argument("long connection must have 6 fields");
    LongConnection l;
    l.temporal_distance = c[0].get<Frame>();
    l.predicted_iou = c[1].get<double>();
    l.pre_velocity = {c[2].get<double>(), c[3].get<double>()};
    l.median_post_velocity = {c[4].get<double>(), c[5].get<double>()};
    e.long_range.push_back(l);
  }
  return e;
}

}  // namespace

std::string_view kind_name(PerturbationKind kind) {
  const auto i = std::size_t(kind);
  if (i >= kPerturbationKinds) throw std::invalid_argument("bad perturbation kind");
  return kNames[i];
}

PerturbationKind kind_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kPerturbationKinds; ++i)
    if (kNames[i] == name) return PerturbationKind(i);
  throw std::invalid_argument("unknown perturbation kind '" + std::string(name) + "'");
}

Ggd diff(const Topology& topology, const FeasibleSolution& x_star, const FeasibleSolution& x) {
  check_shape(topology, x_star);
  check_shape(topology, x);
  Ggd g;
  for (std::uint32_t v = 0; v < topology.n_vertices; ++v) {
    if (x_star.vertex[v] && !x.vertex[v]) g.plus_vertices.push_back(v);
    if (!x_star.vertex[v] && x.vertex[v]) g.minus_vertices.push_back(v);
    g.entry_delta += int(x_star.first[v]) - int(x.first[v]);
  }
  for (std::uint32_t e = 0; e < topology.edges.size(); ++e) {
    if (x_star.edge[e] && !x.edge[e]) g.plus_edges.push_back(e);
    if (!x_star.edge[e] && x.edge[e]) g.minus_edges.push_back(e);
  }
  return g;
}

GroundTruthSolution ground_truth_solution(const TrackingGraph& graph, std::span<const GroundTruthTrack> gt) {
  std::vector<std::pair<TrackId, std::vector<std::uint32_t>>> seqs;
  std::vector<std::string> missing;
  for (const auto& t : gt) {
    std::vector<std::uint32_t> seq;
    for (auto id : t.detections) {
      if (auto v = graph.vertex_of(id)) {
        seq.push_back(*v);
      } else {
        missing.push_back("track " + std::to_string(t.track_id) + ": detection " + std::to_string(id) +
                          " not in graph, skipped");
      }
    }
    seqs.emplace_back(t.track_id, std::move(seq));
  }
  auto out = chains_from_sequences(graph, seqs);
  out.events.insert(out.events.begin(), missing.begin(), missing.end());
  return out;
}

GroundTruthSolution ground_truth_solution(const TrackingGraph& graph, std::span<const OutputTrack> gt,
                                          double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw std::invalid_argument("iou threshold must be in (0,1]");
  std::map<Frame, std::vector<std::uint32_t>> vertices_at;
  for (std::uint32_t v = 0; v < graph.vertices.size(); ++v) vertices_at[graph.vertices[v].detection.frame].push_back(v);
  std::map<Frame, std::vector<std::pair<std::size_t, BoundingBox>>> gt_at;
  for (std::size_t t = 0; t < gt.size(); ++t)
    for (const auto& e : gt[t].entries) gt_at[e.frame].emplace_back(t, e.box);

  std::vector<std::pair<TrackId, std::vector<std::uint32_t>>> seqs;
  for (const auto& t : gt) seqs.emplace_back(t.track_id, std::vector<std::uint32_t>{});
  for (const auto& [frame, boxes] : gt_at) {
    auto it = vertices_at.find(frame);
    if (it == vertices_at.end()) continue;
    const auto& cand = it->second;
    Eigen::MatrixXd cost(Eigen::Index(boxes.size()), Eigen::Index(cand.size()));
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = 0; j < cand.size(); ++j)
        cost(Eigen::Index(i), Eigen::Index(j)) = 1.0 - iou(boxes[i].second, graph.vertices[cand[j]].detection.box);
    const auto match = solve_assignment(cost);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (match[i] < 0) continue;
      if (1.0 - cost(Eigen::Index(i), match[i]) < iou_threshold) continue;
      seqs[boxes[i].first].second.push_back(cand[std::size_t(match[i])]);
    }
  }
  return chains_from_sequences(graph, seqs);
}

FeasibleSolution apply_delta(const FeasibleSolution& x_star, const SolutionDelta& delta) {
  auto x = x_star;
  for (const auto& f : delta.flips) {
    switch (f.term) {
      case SolutionDelta::Term::Vertex: x.vertex.at(f.index) = f.value; break;
      case SolutionDelta::Term::First: x.first.at(f.index) = f.value; break;
      case SolutionDelta::Term::Last: x.last.at(f.index) = f.value; break;
      case SolutionDelta::Term::Edge: x.edge.at(f.index) = f.value; break;
    }
  }
  return x;
}

std::vector<Perturbation> enumerate_deltas(const TrackingGraph& graph, const FeasibleSolution& x_star) {
  const auto& t = graph.topology;
  check_shape(t, x_star);
  if (!check_feasible(t, x_star)) throw ContractViolation("x* is not feasible");
  const auto s = index_solution(t, x_star);
  const auto out = t.outgoing();
  const auto in = t.incoming();
  auto id = [&](std::uint32_t v) { return graph.vertices[v].detection.id; };
  auto from = [&](std::int64_t e) { return t.edges[std::size_t(e)].first; };
  auto to = [&](std::int64_t e) { return t.edges[std::size_t(e)].second; };

  std::vector<Perturbation> result;
  std::vector<bool> chained(t.n_vertices, false);
  auto emit = [&](PerturbationKind kind, std::vector<DetectionId> site, DeltaBuilder& b) {
    auto d = b.take();
    if (d.flips.empty() || !delta_feasible(t, x_star, s, d)) return;
    result.push_back({kind, std::move(site), std::move(d)});
  };

  for (std::uint32_t e1 = 0; e1 < t.edges.size(); ++e1) {
    if (!x_star.edge[e1]) continue;
    const auto [a, b] = t.edges[e1];

    // A->B and C->D become A->D and C->B.
    for (auto e3 : out[a]) {
      const auto d = to(e3);
      if (d == b || s.pred[d] < 0) continue;
      const auto e2 = std::uint32_t(s.pred[d]);
      if (e2 <= e1) continue;
      const auto c = from(e2);
      auto e4 = t.find_edge(c, b);
      if (!e4) continue;
      DeltaBuilder db(x_star);
      db.edge(e1, false).edge(e2, false).edge(e3, true).edge(*e4, true);
      emit(PerturbationKind::IdSwitch, {id(a), id(b), id(c), id(d)}, db);
    }

    {
      DeltaBuilder db(x_star);
      db.edge(e1, false).last(a, true).first(b, true);
      emit(PerturbationKind::Split, {id(a), id(b)}, db);
    }

    // A continues into the start C of another track; B starts its own.
    for (auto e3 : out[a]) {
      const auto c = to(e3);
      if (c == b || !x_star.first[c]) continue;
      DeltaBuilder db(x_star);
      db.edge(e1, false).edge(e3, true).first(c, false).first(b, true);
      emit(PerturbationKind::SplitAndMerge, {id(a), id(b), id(c)}, db);
    }

    // C->D of another track is rerouted into B; A ends, D starts.
    for (auto e3 : in[b]) {
      const auto c = from(e3);
      if (c == a || s.succ[c] < 0) continue;
      const auto e2 = std::uint32_t(s.succ[c]);
      const auto d = to(e2);
      DeltaBuilder db(x_star);
      db.edge(e1, false).edge(e2, false).edge(e3, true).last(a, true).first(d, true);
      emit(PerturbationKind::DoubleSplitAndMerge, {id(a), id(b), id(c), id(d)}, db);
    }

    // B -> C followed in x*; skip B.
    if (s.succ[b] >= 0) {
      const auto e2 = std::uint32_t(s.succ[b]);
      const auto c = to(e2);
      if (auto e3 = t.find_edge(a, c)) {
        DeltaBuilder db(x_star);
        db.edge(e1, false).edge(e2, false).edge(*e3, true).vertex(b, false);
        emit(PerturbationKind::DetectionSkip, {id(a), id(b), id(c)}, db);
      }
    }

    if (x_star.first[a]) {
      DeltaBuilder db(x_star);
      db.vertex(a, false).first(a, false).edge(e1, false).first(b, true);
      emit(PerturbationKind::SkipFirst, {id(a), id(b)}, db);
    }
    if (x_star.last[b]) {
      DeltaBuilder db(x_star);
      db.vertex(b, false).last(b, false).edge(e1, false).last(a, true);
      emit(PerturbationKind::SkipLast, {id(a), id(b)}, db);
    }

    // Here (a, b) play the roles (B, C): a false-positive detection D joins the chain.
    for (auto e3 : out[a]) {
      const auto d = to(e3);
      if (x_star.vertex[d]) continue;
      DeltaBuilder db(x_star);
      db.edge(e1, false).edge(e3, true).vertex(d, true).last(d, true).first(b, true);
      emit(PerturbationKind::SplitToFalsePositive, {id(a), id(b), id(d)}, db);
    }
    for (auto e3 : in[b]) {
      const auto d = from(e3);
      if (x_star.vertex[d]) continue;
      DeltaBuilder db(x_star);
      db.edge(e1, false).edge(e3, true).vertex(d, true).first(d, true).last(a, true);
      emit(PerturbationKind::SplitFromFalsePositive, {id(a), id(b), id(d)}, db);
    }
    // A false positive D inserted between A and B.
    for (auto e3 : out[a]) {
      const auto d = to(e3);
      if (x_star.vertex[d]) continue;
      auto e4 = t.find_edge(d, b);
      if (!e4) continue;
      DeltaBuilder db(x_star);
      db.edge(e1, false).edge(e3, true).edge(*e4, true).vertex(d, true);
      const auto before = result.size();
      emit(PerturbationKind::FalsePositive, {id(a), id(b), id(d)}, db);
      if (result.size() > before) chained[d] = true;
    }
  }

  for (std::uint32_t v = 0; v < t.n_vertices; ++v) {
    if (x_star.vertex[v] && x_star.last[v]) {
      for (auto e : out[v]) {
        const auto c = to(e);
        if (x_star.vertex[c] && x_star.first[c]) {
          DeltaBuilder db(x_star);
          db.edge(e, true).last(v, false).first(c, false);
          emit(PerturbationKind::Merge, {id(v), id(c)}, db);
        } else if (!x_star.vertex[c]) {
          DeltaBuilder db(x_star);
          db.vertex(c, true).last(c, true).edge(e, true).last(v, false);
          emit(PerturbationKind::ExtraLast, {id(v), id(c)}, db);
        }
      }
    }
    if (x_star.vertex[v] && x_star.first[v]) {
      for (auto e : in[v]) {
        const auto a = from(e);
        if (x_star.vertex[a]) continue;
        DeltaBuilder db(x_star);
        db.vertex(a, true).first(a, true).edge(e, true).first(v, false);
        emit(PerturbationKind::ExtraFirst, {id(a), id(v)}, db);
      }
    }
    if (!x_star.vertex[v] && !chained[v]) {
      DeltaBuilder db(x_star);
      db.vertex(v, true).first(v, true).last(v, true);
      emit(PerturbationKind::FalsePositive, {id(v)}, db);
    }
  }

  std::stable_sort(result.begin(), result.end(), [](const Perturbation& l, const Perturbation& r) {
    if (l.kind != r.kind) return l.kind < r.kind;
    return l.site < r.site;
  });
  return result;
}

std::vector<Ggd> enumerate_perturbations(const TrackingGraph& graph, const FeasibleSolution& x_star) {
  std::vector<Ggd> out;
  for (const auto& p : enumerate_deltas(graph, x_star))
    out.push_back(ggd_from_delta(graph.topology, p.delta, p.kind, p.site));
  return out;
}

std::vector<Ggd> subtrack_examples(const TrackingGraph& graph, const FeasibleSolution& x_star, int n_minlen) {
  if (n_minlen < 1) throw std::invalid_argument("n_minlen must be >= 1");
  const auto& t = graph.topology;
  const std::size_t m = std::size_t(n_minlen);
  const std::size_t half = (m + 1) / 2;
  std::vector<Ggd> too_short, proper;
  for (const auto& chain : solution_chains(t, x_star)) {
    for (std::size_t start = 0; start + m <= chain.size(); start += m) {
      std::vector<DetectionId> site;
      for (std::size_t j = start; j < start + m; ++j) site.push_back(graph.vertices[chain[j]].detection.id);
      auto part = [&](std::size_t len, std::vector<std::uint32_t>& vs, std::vector<std::uint32_t>& es) {
        for (std::size_t j = start; j < start + len; ++j) {
          vs.push_back(chain[j]);
          if (j + 1 < start + len) es.push_back(*t.find_edge(chain[j], chain[j + 1]));
        }
      };
      Ggd a;
      a.kind = PerturbationKind::TooShortTrack;
      a.site = site;
      a.entry_delta = -1;
      part(half, a.minus_vertices, a.minus_edges);
      too_short.push_back(std::move(a));

      Ggd b;
      b.kind = PerturbationKind::ProperTrack;
      b.site = site;
      b.entry_delta = 1;
      part(m, b.plus_vertices, b.plus_edges);
      proper.push_back(std::move(b));
    }
  }
  auto by_site = [](const Ggd& l, const Ggd& r) { return l.site < r.site; };
  std::sort(too_short.begin(), too_short.end(), by_site);
  std::sort(proper.begin(), proper.end(), by_site);
  too_short.insert(too_short.end(), proper.begin(), proper.end());
  return too_short;
}

std::array<std::size_t, kPerturbationKinds> dataset_stats(std::span<const Ggd> ggds) {
  std::array<std::size_t, kPerturbationKinds> counts{};
  for (const auto& g : ggds)
    if (g.kind) ++counts[std::size_t(*g.kind)];
  return counts;
}

GgdDataset GgdDataset::from_graph(const TrackingGraph& graph, std::span<const Ggd> ggds) {
  auto pool = std::make_shared<FeaturePool>();
  pool->scale = graph.scale();
  pool->n_linpkt = graph.params.n_linpkt;
  std::unordered_map<std::uint32_t, std::uint32_t> vmap, emap;
  auto remap_v = [&](std::uint32_t v) {
    auto [it, fresh] = vmap.emplace(v, std::uint32_t(pool->vertices.size()));
    if (fresh) pool->vertices.push_back(graph.vertices.at(v).features);
    return it->second;
  };
  auto remap_e = [&](std::uint32_t e) {
    auto [it, fresh] = emap.emplace(e, std::uint32_t(pool->edges.size()));
    if (fresh) pool->edges.push_back(graph.edges.at(e).features);
    return it->second;
  };
  GgdDataset ds;
  ds.items.reserve(ggds.size());
  for (const auto& g : ggds) {
    Ggd h = g;
    for (auto& v : h.plus_vertices) v = remap_v(v);
    for (auto& v : h.minus_vertices) v = remap_v(v);
    for (auto& e : h.plus_edges) e = remap_e(e);
    for (auto& e : h.minus_edges) e = remap_e(e);
    ds.items.push_back(std::move(h));
  }
  ds.pool = std::move(pool);
  return ds;
}

GgdDataset GgdDataset::concat(std::span<const GgdDataset> parts) {
  auto pool = std::make_shared<FeaturePool>();
  GgdDataset ds;
  bool first = true;
  for (const auto& p : parts) {
    if (!p.pool) continue;
    if (first) {
      pool->scale = p.pool->scale;
      pool->n_linpkt = p.pool->n_linpkt;
      first = false;
    } else if (!(pool->scale == p.pool->scale) || pool->n_linpkt != p.pool->n_linpkt) {
      throw std::invalid_argument("cannot concatenate GGD datasets with different feature scales");
    }
    const auto voff = std::uint32_t(pool->vertices.size());
    const auto eoff = std::uint32_t(pool->edges.size());
    pool->vertices.insert(pool->vertices.end(), p.pool->vertices.begin(), p.pool->vertices.end());
    pool->edges.insert(pool->edges.end(), p.pool->edges.begin(), p.pool->edges.end());
    for (const auto& g : p.items) {
      Ggd h = g;
      for (auto* v : {&h.plus_vertices, &h.minus_vertices})
        for (auto& i : *v) i += voff;
      for (auto* v : {&h.plus_edges, &h.minus_edges})
        for (auto& i : *v) i += eoff;
      ds.items.push_back(std::move(h));
    }
  }
  ds.pool = std::move(pool);
  return ds;
}

GgdDataset GgdDataset::select(std::span<const std::size_t> indices) const {
  GgdDataset ds;
  ds.pool = pool;
  ds.items.reserve(indices.size());
  for (auto i : indices) ds.items.push_back(items.at(i));
  return ds;
}

void write_ggds(std::ostream& out, const GgdDataset& dataset) {
  const FeaturePool empty_pool;
  const auto& pool = dataset.pool ? *dataset.pool : empty_pool;
  out << json{{"format", "flowtrack-ggd"},
              {"version", 1},
              {"fps", pool.scale.fps},
              {"diagonal", pool.scale.diagonal},
              {"n_linpkt", pool.n_linpkt},
              {"n_vertices", pool.vertices.size()},
              {"n_edges", pool.edges.size()},
              {"n_ggds", dataset.items.size()}}
             .dump()
      << '\n';
  for (const auto& v : pool.vertices) out << json{{"v", {v.confidence, v.max_iou, v.max_ioa}}}.dump() << '\n';
  for (const auto& e : pool.edges) out << json{{"e", edge_json(e)}}.dump() << '\n';
  for (const auto& g : dataset.items) {
    json r = {{"kind", g.kind ? json(std::string(kind_name(*g.kind))) : json(nullptr)},
              {"site", g.site},
              {"entry_delta", g.entry_delta},
              {"plus_vertices", g.plus_vertices},
              {"minus_vertices", g.minus_vertices},
              {"plus_edges", g.plus_edges},
              {"minus_edges", g.minus_edges}};
    out << r.dump() << '\n';
  }
}

GgdDataset read_ggds(std::istream& in, const std::string& source) {
  auto pool = std::make_shared<FeaturePool>();
  GgdDataset ds;
  std::string line;
  std::size_t number = 0;
  std::size_t n_vertices = 0, n_edges = 0, n_ggds = 0;
  bool header = false;
  try {
    while (std::getline(in, line)) {
      ++number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto r = json::parse(line);
      if (!header) {
        if (r.value("format", "") != "flowtrack-ggd") throw std::invalid_argument("not a GGD file");
        if (r.at("version").get<int>() != 1) throw std::invalid_argument("unsupported GGD file version");
        pool->scale = {r.at("fps").get<double>(), r.at("diagonal").get<double>()};
        pool->n_linpkt = r.at("n_linpkt").get<int>();
        n_vertices = r.at("n_vertices").get<std::size_t>();
        n_edges = r.at("n_edges").get<std::size_t>();
        n_ggds = r.at("n_ggds").get<std::size_t>();
        header = true;
      } else if (pool->vertices.size() < n_vertices) {
        const auto& v = r.at("v");
        if (!v.is_array() || v.size() != 3) throw std::invalid_argument("vertex features must be a triple");
        pool->vertices.push_back({v[0].get<double>(), v[1].get<double>(), v[2].get<double>()});
      } else if (pool->edges.size() < n_edges) {
        pool->edges.push_back(edge_from_json(r.at("e")));
      } else {
        Ggd g;
        if (!r.at("kind").is_null()) g.kind = kind_from_name(r.at("kind").get<std::string>());
        g.site = r.at("site").get<std::vector<DetectionId>>();
        g.entry_delta = r.at("entry_delta").get<int>();
        g.plus_vertices = r.at("plus_vertices").get<std::vector<std::uint32_t>>();
        g.minus_vertices = r.at("minus_vertices").get<std::vector<std::uint32_t>>();
        g.plus_edges = r.at("plus_edges").get<std::vector<std::uint32_t>>();
        g.minus_edges = r.at("minus_edges").get<std::vector<std::uint32_t>>();
        for (auto* v : {&g.plus_vertices, &g.minus_vertices})
          for (auto i : *v)
            if (i >= n_vertices) throw std::invalid_argument("vertex reference out of range");
        for (auto* v : {&g.plus_edges, &g.minus_edges})
          for (auto i : *v)
            if (i >= n_edges) throw std::invalid_argument("edge reference out of range");
        ds.items.push_back(std::move(g));
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(source, number, e.what());
  } catch (const std::invalid_argument& e) {
    throw ParseError(source, number, e.what());
  }
  if (!header) throw ParseError(source, number, "missing header");
  if (pool->vertices.size() != n_vertices || pool->edges.size() != n_edges || ds.items.size() != n_ggds)
    throw ParseError(source, number, "truncated GGD file");
  ds.pool = std::move(pool);
  return ds;
}

void write_ggds_file(const std::filesystem::path& path, const GgdDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_ggds(out, dataset);
}

GgdDataset read_ggds_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_ggds(in, path.string());
}

void write_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json{{"train", manifest.train}, {"validation", manifest.validation}}.dump(2) << '\n';
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    const auto j = json::parse(in);
    return {j.at("train").get<std::vector<std::string>>(), j.at("validation").get<std::vector<std::string>>()};
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace flowtrack
