#pragma once

#include <span>
#include <vector>

#include "flowtrack/ggd.hpp"
#include "flowtrack/graph.hpp"
#include "flowtrack/model.hpp"
#include "flowtrack/solution.hpp"

namespace flowtrack {

// Sum of f_detect over used vertices, f_edge over used edges and s_entry per track start.
// Every term is evaluated on its own, without batching.
double score_solution(const ScoringModel& model, const TrackingGraph& graph, const FeasibleSolution& x);

// Plus terms minus minus terms plus s_entry * entry_delta.
double score_ggd(const ScoringModel& model, const TrackingGraph& graph, const Ggd& ggd);
double score_ggd(const ScoringModel& model, const GgdDataset& dataset, const Ggd& ggd);

double sigmoid(double x);
// -log(sigmoid(d)), evaluated as softplus(-d).
double ranking_loss(double d);
// -log(1 - sigmoid(s)), the loss of a pair offered in reverse order, evaluated as softplus(s).
double negative_sample_loss(double s);
// d/dd of ranking_loss.
double ranking_loss_derivative(double d);

// Batched GGD scores; every distinct vertex and edge of the selection is evaluated once.
std::vector<double> score_ggds(const ScoringModel& model, const GgdDataset& dataset,
                               std::span<const std::size_t> items);
std::vector<double> score_ggds(const ScoringModel& model, const GgdDataset& dataset);

struct BatchLoss {
  double mean_loss = 0.0;
  std::vector<double> scores;  // per selected item
};

// Mean ranking loss over the selection; its gradient is added to `grad`.
BatchLoss loss_and_gradients(const ScoringModel& model, const GgdDataset& dataset,
                             std::span<const std::size_t> items, ParamGradient& grad);

}  // namespace flowtrack
