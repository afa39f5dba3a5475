#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "flowtrack/random.hpp"

namespace flowtrack {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

// Inputs seen by each layer during a forward pass, one column per sample.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;
};

struct MlpGradient {
  std::vector<DenseLayer> layers;
};

// Fully connected block: `n_layers` rectified-linear hidden layers of `n_features` units
// followed by a linear output layer. Samples are matrix columns.
class MlpBlock {
 public:
  MlpBlock() = default;
  MlpBlock(int input_width, int n_layers, int n_features, int output_width);
  explicit MlpBlock(std::vector<DenseLayer> layers);

  int input_width() const { return int(layers_.front().weight.cols()); }
  int output_width() const { return int(layers_.back().weight.rows()); }
  int n_layers() const { return int(layers_.size()) - 1; }
  bool empty() const { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::size_t parameter_count() const;

  // Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
  void initialize(Rng& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpTape* tape = nullptr) const;
  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

  // Accumulates parameter gradients into `grad` (shape-congruent) and returns the gradient
  // with respect to the block input when `want_input_grad` is set.
  Eigen::MatrixXd backward(const MlpTape& tape, Eigen::MatrixXd grad_out, MlpGradient& grad,
                           bool want_input_grad) const;

  MlpGradient zero_gradient() const;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace flowtrack
