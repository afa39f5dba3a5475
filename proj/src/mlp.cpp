#include "flowtrack/mlp.hpp"

#include <cmath>
#include <string>

namespace flowtrack {

MlpBlock::MlpBlock(int input_width, int n_layers, int n_features, int output_width) {
  if (input_width < 1 || n_layers < 0 || (n_layers > 0 && n_features < 1) || output_width < 1) {
    throw ShapeError("invalid block dimensions");
  }
  int in = input_width;
  for (int l = 0; l < n_layers; ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(n_features, in), Eigen::VectorXd::Zero(n_features)});
    in = n_features;
  }
  layers_.push_back({Eigen::MatrixXd::Zero(output_width, in), Eigen::VectorXd::Zero(output_width)});
}

MlpBlock::MlpBlock(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("block needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) throw ShapeError("bias width mismatch");
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows())
      throw ShapeError("layer " + std::to_string(l) + " input width mismatch");
  }
}

std::size_t MlpBlock::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += std::size_t(l.weight.size() + l.bias.size());
  return n;
}

void MlpBlock::initialize(Rng& rng) {
  for (auto& l : layers_) {
    const double limit = std::sqrt(6.0 / double(l.weight.rows() + l.weight.cols()));
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = rng.uniform(-limit, limit);
    l.bias.setZero();
  }
}

Eigen::MatrixXd MlpBlock::forward(const Eigen::MatrixXd& x, MlpTape* tape) const {
  if (x.rows() != input_width()) {
    throw ShapeError("block expects " + std::to_string(input_width()) + " inputs, got " + std::to_string(x.rows()));
  }
  if (tape) tape->inputs.clear();
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (tape) tape->inputs.push_back(a);
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd MlpBlock::forward_one(const Eigen::VectorXd& x) const { return forward(Eigen::MatrixXd(x)).col(0); }

Eigen::MatrixXd MlpBlock::backward(const MlpTape& tape, Eigen::MatrixXd g, MlpGradient& grad,
                                   bool want_input_grad) const {
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& a = tape.inputs[l];
    grad.layers[l].weight.noalias() += g * a.transpose();
    grad.layers[l].bias += g.rowwise().sum();
    if (l == 0 && !want_input_grad) return {};
    Eigen::MatrixXd next = layers_[l].weight.transpose() * g;
    if (l > 0) next = next.cwiseProduct((a.array() > 0.0).cast<double>().matrix());
    g = std::move(next);
  }
  return g;
}

MlpGradient MlpBlock::zero_gradient() const {
  MlpGradient g;
  for (const auto& l : layers_) {
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

}  // namespace flowtrack
