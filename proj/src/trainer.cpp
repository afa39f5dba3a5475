#include "flowtrack/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "flowtrack/random.hpp"
#include "flowtrack/scoring.hpp"

namespace flowtrack {
namespace {

std::vector<std::pair<double*, Eigen::Index>> parameter_arrays(ScoringModel& model) {
  std::vector<std::pair<double*, Eigen::Index>> out;
  for_each_parameter_array(model, [&](auto m) { out.emplace_back(m.data(), m.size()); });
  return out;
}

std::vector<std::pair<double*, Eigen::Index>> gradient_arrays(ParamGradient& grad) {
  std::vector<std::pair<double*, Eigen::Index>> out;
  for_each_gradient_array(grad, [&](auto m) { out.emplace_back(m.data(), m.size()); });
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("Adam betas must be in [0,1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be > 0");
  if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
}

Adam::Adam(const ScoringModel& model, const TrainConfig& config) : config_(config) {
  for_each_parameter_array(model, [&](auto m) {
    m_.push_back(Eigen::VectorXd::Zero(m.size()));
    v_.push_back(Eigen::VectorXd::Zero(m.size()));
  });
}

void Adam::step(ScoringModel& model, ParamGradient& grad) {
  auto params = parameter_arrays(model);
  auto grads = gradient_arrays(grad);
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ShapeError("optimizer state does not match model");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(t_));
  const double c2 = 1.0 - std::pow(b2, double(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].second != m_[i].size() || grads[i].second != m_[i].size())
      throw ShapeError("optimizer state does not match model");
    Eigen::Map<Eigen::VectorXd> p(params[i].first, params[i].second);
    Eigen::Map<const Eigen::VectorXd> g(grads[i].first, grads[i].second);
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= config_.learning_rate * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

double ranking_accuracy(const ScoringModel& model, const GgdDataset& ggds) {
  if (ggds.empty()) throw std::invalid_argument("ranking accuracy of an empty GGD set is undefined");
  const auto scores = score_ggds(model, ggds);
  const auto correct = std::count_if(scores.begin(), scores.end(), [](double s) { return s > 0.0; });
  return double(correct) / double(scores.size());
}

std::pair<ScoringModel, TrainReport> train(const ScoringModel& model, const GgdDataset& train_set,
                                           const GgdDataset& validation_set, const TrainConfig& config) {
  config.validate();
  model.check();
  TrainReport report;
  if (config.max_epochs == 0) return {model, report};
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (validation_set.empty()) throw std::invalid_argument("validation set is empty");

  ScoringModel current = model;
  ScoringModel best = model;
  Adam adam(current, config);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + start, std::min(config.batch_size, order.size() - start));
      auto grad = ParamGradient::zeros_like(current);
      const auto result = loss_and_gradients(current, train_set, batch, grad);
      for (std::size_t j = 0; j < batch.size(); ++j) {
        if (!std::isfinite(result.scores[j])) {
          throw NonFiniteLossError(batch[j], "non-finite score on training GGD " + std::to_string(batch[j]) +
                                                 " in epoch " + std::to_string(epoch));
        }
      }
      if (!std::isfinite(result.mean_loss) || !std::isfinite(grad.s_entry))
        throw NonFiniteLossError(batch.front(), "non-finite loss in batch starting at GGD " + std::to_string(batch.front()));
      loss_sum += result.mean_loss * double(batch.size());
      adam.step(current, grad);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(order.size());
    const auto val_scores = score_ggds(current, validation_set);
    double val_loss = 0.0;
    std::size_t correct = 0;
    for (double v : val_scores) {
      val_loss += ranking_loss(v);
      correct += v > 0.0;
    }
    rec.validation_accuracy = double(correct) / double(val_scores.size());
    rec.validation_loss = val_loss / double(val_scores.size());
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (config.progress) {
      *config.progress << "epoch " << epoch << " loss " << rec.train_loss << " val_acc " << rec.validation_accuracy
                       << " val_loss " << rec.validation_loss << " (" << rec.seconds << " s)\n";
    }
    // accuracy saturates on easy validation sets; equal accuracy with lower loss still counts as progress
    const bool better = rec.validation_accuracy > report.best_accuracy ||
                        (rec.validation_accuracy == report.best_accuracy && rec.validation_loss < report.best_loss);
    if (report.best_epoch == 0 || better) {
      report.best_epoch = epoch;
      report.best_accuracy = rec.validation_accuracy;
      report.best_loss = rec.validation_loss;
      best = current;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      report.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  return {std::move(best), std::move(report)};
}

GgdDataset subsample(const GgdDataset& ggds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0,1]");
  const std::size_t n = ggds.size();
  const auto k = std::size_t(std::llround(fraction * double(n)));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (k < n) {
    Rng rng(seed);
    // partial Fisher-Yates: the first k positions become a uniform sample
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  return ggds.select(idx);
}

void write_report(std::ostream& out, const TrainReport& report) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"validation_accuracy", e.validation_accuracy},
                      {"validation_loss", e.validation_loss},
                      {"seconds", e.seconds}});
  }
  out << nlohmann::json{{"best_epoch", report.best_epoch},
                        {"best_accuracy", report.best_accuracy},
                        {"best_validation_loss", report.best_loss},
                        {"stopped_early", report.stopped_early},
                        {"epochs", std::move(epochs)}}
             .dump(2)
      << '\n';
}

void write_report_file(const std::filesystem::path& path, const TrainReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_report(out, report);
}

}  // namespace flowtrack
