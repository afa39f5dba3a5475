#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <utility>
#include <vector>

#include "flowtrack/ggd.hpp"
#include "flowtrack/model.hpp"

namespace flowtrack {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  int max_epochs = 10;
  int patience = 0;  // epochs without validation improvement before stopping; 0 never stops early
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::ostream* progress = nullptr;  // one line per epoch when set

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  double validation_loss = 0.0;  // mean ranking loss
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0 when no epoch ran
  double best_accuracy = 0.0;
  double best_loss = 0.0;  // validation loss of the best epoch
  bool stopped_early = false;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(std::size_t ggd_index, const std::string& what)
      : std::runtime_error(what), ggd_index_(ggd_index) {}
  std::size_t ggd_index() const { return ggd_index_; }

 private:
  std::size_t ggd_index_;
};

class Adam {
 public:
  Adam(const ScoringModel& model, const TrainConfig& config);
  void step(ScoringModel& model, ParamGradient& grad);
  long steps() const { return t_; }

 private:
  TrainConfig config_;
  std::vector<Eigen::VectorXd> m_, v_;
  long t_ = 0;
};

// Fraction of GGDs scoring > 0. Throws std::invalid_argument on an empty dataset.
double ranking_accuracy(const ScoringModel& model, const GgdDataset& ggds);

// Mini-batch Adam on the mean ranking loss, returning the parameters of the epoch with
// the best validation accuracy. Ties go to the lower validation loss, then the earlier epoch.
// Patience counts epochs that improve on neither.
std::pair<ScoringModel, TrainReport> train(const ScoringModel& model, const GgdDataset& train_set,
                                           const GgdDataset& validation_set, const TrainConfig& config);

// round(fraction * n) items drawn without replacement; original order kept.
GgdDataset subsample(const GgdDataset& ggds, double fraction, std::uint64_t seed);

void write_report(std::ostream& out, const TrainReport& report);
void write_report_file(const std::filesystem::path& path, const TrainReport& report);

}  // namespace flowtrack
