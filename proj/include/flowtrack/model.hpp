#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "flowtrack/graph.hpp"
#include "flowtrack/mlp.hpp"

namespace flowtrack {

struct Architecture {
  int det_layers = 4;
  int det_features = 32;
  int klt_layers = 7;
  int klt_features = 64;
  int long_layers = 7;
  int long_features = 32;
  int combine_layers = 4;
  int combine_features = 256;
  int n_linpkt = 5;

  static constexpr int kDetectionInputs = 3;
  static constexpr int kLongInputs = 6;

  int klt_inputs() const { return 3 + 2 * n_linpkt; }
  // Pooled KLT features, pooled long features, |P|, |C|.
  int combine_inputs() const { return klt_features + long_features + 2; }

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct ScoringModel {
  Architecture arch;
  double s_entry = -1.0;
  MlpBlock detect;      // 3 -> 1
  MlpBlock klt;         // klt_inputs -> klt_features
  MlpBlock long_range;  // 6 -> long_features
  MlpBlock combine;     // combine_inputs -> 1

  // All parameters zero except s_entry.
  static ScoringModel zeros(const Architecture& arch, double s_entry = -1.0);
  // Fan-in/fan-out uniform weights, zero biases, s_entry = -1.
  static ScoringModel initialized(const Architecture& arch, std::uint64_t seed);

  std::size_t parameter_count() const;
  void check() const;  // block widths agree with `arch`; throws ShapeError
};

struct ParamGradient {
  double s_entry = 0.0;
  MlpGradient detect;
  MlpGradient klt;
  MlpGradient long_range;
  MlpGradient combine;

  static ParamGradient zeros_like(const ScoringModel& model);
  ParamGradient& operator+=(const ParamGradient& other);
  ParamGradient& operator*=(double factor);
};

// Visits every parameter array of the model in checkpoint order: s_entry, then for
// detect, klt, long, combine each layer's weight (column-major) followed by its bias.
template <typename Model, typename Fn>
void for_each_parameter_array(Model& model, Fn&& fn) {
  fn(Eigen::Map<std::conditional_t<std::is_const_v<Model>, const Eigen::VectorXd, Eigen::VectorXd>>(&model.s_entry, 1));
  for (auto* block : {&model.detect, &model.klt, &model.long_range, &model.combine}) {
    for (auto& layer : block->layers()) {
      fn(Eigen::Map<std::conditional_t<std::is_const_v<Model>, const Eigen::VectorXd, Eigen::VectorXd>>(
          layer.weight.data(), layer.weight.size()));
      fn(Eigen::Map<std::conditional_t<std::is_const_v<Model>, const Eigen::VectorXd, Eigen::VectorXd>>(
          layer.bias.data(), layer.bias.size()));
    }
  }
}

template <typename Fn>
void for_each_gradient_array(ParamGradient& grad, Fn&& fn) {
  fn(Eigen::Map<Eigen::VectorXd>(&grad.s_entry, 1));
  for (auto* block : {&grad.detect, &grad.klt, &grad.long_range, &grad.combine}) {
    for (auto& layer : block->layers) {
      fn(Eigen::Map<Eigen::VectorXd>(layer.weight.data(), layer.weight.size()));
      fn(Eigen::Map<Eigen::VectorXd>(layer.bias.data(), layer.bias.size()));
    }
  }
}

// Network input encodings.
Eigen::Vector3d encode_detection(const DetectionFeatures& f);
Eigen::VectorXd encode_klt(const KltConnection& c, const FeatureScale& scale, int n_linpkt);
Eigen::VectorXd encode_long(const LongConnection& c, const FeatureScale& scale);

double f_detect(const ScoringModel& model, const DetectionFeatures& features);
// Throws std::invalid_argument when both connection lists are empty.
double f_edge(const ScoringModel& model, const EdgeFeatures& edge, const FeatureScale& scale);

// Column-packed inputs for a set of edges, ready for batched evaluation.
struct EdgeBatch {
  Eigen::MatrixXd klt_inputs;           // klt_inputs x total klt connections
  Eigen::MatrixXd long_inputs;          // 6 x total long connections
  std::vector<std::size_t> klt_offsets;   // size n_edges+1
  std::vector<std::size_t> long_offsets;  // size n_edges+1

  std::size_t size() const { return klt_offsets.empty() ? 0 : klt_offsets.size() - 1; }
  static EdgeBatch pack(std::span<const EdgeFeatures* const> edges, const FeatureScale& scale,
                        const Architecture& arch);
};

struct EdgeTape {
  MlpTape klt;
  MlpTape long_range;
  MlpTape combine;
};

Eigen::VectorXd edge_scores(const ScoringModel& model, const EdgeBatch& batch, EdgeTape* tape = nullptr);
// `upstream` holds d(objective)/d(edge score) for each edge of the batch.
void edge_backward(const ScoringModel& model, const EdgeBatch& batch, const EdgeTape& tape,
                   const Eigen::VectorXd& upstream, ParamGradient& grad);

Eigen::MatrixXd pack_detections(std::span<const DetectionFeatures* const> vertices);
Eigen::VectorXd detect_scores(const ScoringModel& model, const Eigen::MatrixXd& inputs, MlpTape* tape = nullptr);
void detect_backward(const ScoringModel& model, const MlpTape& tape, const Eigen::VectorXd& upstream,
                     ParamGradient& grad);

// Scores many edges in fixed-size slices to bound memory.
std::vector<double> edge_scores_chunked(const ScoringModel& model, std::span<const EdgeFeatures* const> edges,
                                        const FeatureScale& scale, std::size_t slice = 2048);

// Binary checkpoint: magic, version, architecture integers, s_entry, then every block's
// layer shapes and parameters in declared order. Little-endian IEEE-754 doubles.
void save_model(std::ostream& out, const ScoringModel& model);
ScoringModel load_model(std::istream& in);
void save_model_file(const std::filesystem::path& path, const ScoringModel& model);
ScoringModel load_model_file(const std::filesystem::path& path);

}  // namespace flowtrack
