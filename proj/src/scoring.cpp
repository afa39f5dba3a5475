#include "flowtrack/scoring.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

namespace flowtrack {
namespace {

template <typename VertexAt, typename EdgeAt>
double score_terms(const ScoringModel& model, const FeatureScale& scale, const Ggd& g, VertexAt&& vertex_at,
                   EdgeAt&& edge_at) {
  double s = model.s_entry * double(g.entry_delta);
  for (auto v : g.plus_vertices) s += f_detect(model, vertex_at(v));
  for (auto v : g.minus_vertices) s -= f_detect(model, vertex_at(v));
  for (auto e : g.plus_edges) s += f_edge(model, edge_at(e), scale);
  for (auto e : g.minus_edges) s -= f_edge(model, edge_at(e), scale);
  return s;
}

// Distinct pool entries referenced by a selection, plus each GGD's references into them.
struct Gathered {
  std::vector<const DetectionFeatures*> vertices;
  std::vector<const EdgeFeatures*> edges;
  std::vector<std::uint32_t> vertex_pool_index;
  std::vector<std::uint32_t> edge_pool_index;
  std::unordered_map<std::uint32_t, std::uint32_t> vslot, eslot;
};

Gathered gather(const GgdDataset& ds, std::span<const std::size_t> items) {
  Gathered g;
  const auto& pool = *ds.pool;
  for (auto i : items) {
    const auto& item = ds.items.at(i);
    for (auto* list : {&item.plus_vertices, &item.minus_vertices})
      for (auto v : *list)
        if (g.vslot.emplace(v, std::uint32_t(g.vertices.size())).second) g.vertices.push_back(&pool.vertices.at(v));
    for (auto* list : {&item.plus_edges, &item.minus_edges})
      for (auto e : *list)
        if (g.eslot.emplace(e, std::uint32_t(g.edges.size())).second) g.edges.push_back(&pool.edges.at(e));
  }
  return g;
}

double combine(const ScoringModel& model, const Ggd& item, const Gathered& g, const Eigen::VectorXd& vs,
               const Eigen::VectorXd& es) {
  double s = model.s_entry * double(item.entry_delta);
  for (auto v : item.plus_vertices) s += vs(g.vslot.at(v));
  for (auto v : item.minus_vertices) s -= vs(g.vslot.at(v));
  for (auto e : item.plus_edges) s += es(g.eslot.at(e));
  for (auto e : item.minus_edges) s -= es(g.eslot.at(e));
  return s;
}

}  // namespace

double score_solution(const ScoringModel& model, const TrackingGraph& graph, const FeasibleSolution& x) {
  const auto scale = graph.scale();
  double s = 0.0;
  for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
    if (x.vertex.at(v)) s += f_detect(model, graph.vertices[v].features);
    if (x.first.at(v)) s += model.s_entry;
  }
  for (std::size_t e = 0; e < graph.edges.size(); ++e)
    if (x.edge.at(e)) s += f_edge(model, graph.edges[e].features, scale);
  return s;
}

double score_ggd(const ScoringModel& model, const TrackingGraph& graph, const Ggd& ggd) {
  return score_terms(
      model, graph.scale(), ggd, [&](std::uint32_t v) -> const DetectionFeatures& { return graph.vertices.at(v).features; },
      [&](std::uint32_t e) -> const EdgeFeatures& { return graph.edges.at(e).features; });
}

double score_ggd(const ScoringModel& model, const GgdDataset& dataset, const Ggd& ggd) {
  const auto& pool = *dataset.pool;
  return score_terms(
      model, pool.scale, ggd, [&](std::uint32_t v) -> const DetectionFeatures& { return pool.vertices.at(v); },
      [&](std::uint32_t e) -> const EdgeFeatures& { return pool.edges.at(e); });
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

double ranking_loss(double d) {
  // softplus(-d) = max(-d, 0) + log1p(exp(-|d|))
  return std::max(-d, 0.0) + std::log1p(std::exp(-std::abs(d)));
}

double negative_sample_loss(double s) { return std::max(s, 0.0) + std::log1p(std::exp(-std::abs(s))); }

double ranking_loss_derivative(double d) { return -sigmoid(-d); }

std::vector<double> score_ggds(const ScoringModel& model, const GgdDataset& dataset,
                               std::span<const std::size_t> items) {
  const auto g = gather(dataset, items);
  const Eigen::VectorXd vs = g.vertices.empty() ? Eigen::VectorXd() : detect_scores(model, pack_detections(g.vertices));
  const auto batch = EdgeBatch::pack(g.edges, dataset.pool->scale, model.arch);
  const Eigen::VectorXd es = g.edges.empty() ? Eigen::VectorXd() : edge_scores(model, batch);
  std::vector<double> out;
  out.reserve(items.size());
  for (auto i : items) out.push_back(combine(model, dataset.items[i], g, vs, es));
  return out;
}

std::vector<double> score_ggds(const ScoringModel& model, const GgdDataset& dataset) {
  std::vector<double> out;
  out.reserve(dataset.size());
  constexpr std::size_t slice = 1024;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += slice) {
    idx.resize(std::min(slice, dataset.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto part = score_ggds(model, dataset, idx);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

BatchLoss loss_and_gradients(const ScoringModel& model, const GgdDataset& dataset,
                             std::span<const std::size_t> items, ParamGradient& grad) {
  BatchLoss result;
  if (items.empty()) return result;
  const auto g = gather(dataset, items);

  MlpTape det_tape;
  EdgeTape edge_tape;
  const Eigen::VectorXd vs =
      g.vertices.empty() ? Eigen::VectorXd() : detect_scores(model, pack_detections(g.vertices), &det_tape);
  const auto batch = EdgeBatch::pack(g.edges, dataset.pool->scale, model.arch);
  const Eigen::VectorXd es = g.edges.empty() ? Eigen::VectorXd() : edge_scores(model, batch, &edge_tape);

  Eigen::VectorXd dv = Eigen::VectorXd::Zero(Eigen::Index(g.vertices.size()));
  Eigen::VectorXd de = Eigen::VectorXd::Zero(Eigen::Index(g.edges.size()));
  const double inv_n = 1.0 / double(items.size());
  double total = 0.0;
  for (auto i : items) {
    const auto& item = dataset.items[i];
    const double d = combine(model, item, g, vs, es);
    result.scores.push_back(d);
    total += ranking_loss(d);
    const double up = ranking_loss_derivative(d) * inv_n;
    grad.s_entry += up * double(item.entry_delta);
    for (auto v : item.plus_vertices) dv(g.vslot.at(v)) += up;
    for (auto v : item.minus_vertices) dv(g.vslot.at(v)) -= up;
    for (auto e : item.plus_edges) de(g.eslot.at(e)) += up;
    for (auto e : item.minus_edges) de(g.eslot.at(e)) -= up;
  }
  result.mean_loss = total * inv_n;
  if (!g.vertices.empty()) detect_backward(model, det_tape, dv, grad);
  if (!g.edges.empty()) edge_backward(model, batch, edge_tape, de, grad);
  return result;
}

}  // namespace flowtrack
