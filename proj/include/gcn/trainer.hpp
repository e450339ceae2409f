#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gcn/dataset.hpp"
#include "gcn/graph_ops.hpp"
#include "gcn/model.hpp"

namespace gcn {

enum class PropagatorKind { normalized_adjacency, transition };

struct PropagatorConfig {
  PropagatorKind kind = PropagatorKind::normalized_adjacency;
  int k = 1;
  std::size_t n_walks = 10000;
  double prune_threshold = 0.0;
  // Use (P¹)^k instead of the walk estimate; only sensible on small graphs.
  bool exact = false;
};

struct TrainConfig {
  std::size_t max_epochs = 5000;
  std::size_t min_epochs_before_stop = 30;
  std::size_t patience = 10;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 16;
  double dropout_rate = 0.5;
  bool normalize_features = true;
  LossConfig loss;
  PropagatorConfig propagator;
};

void validate_config(const TrainConfig& config);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamMoments {
  DenseMatrix m;
  DenseMatrix v;
};

struct AdamState {
  AdamMoments w0;
  AdamMoments w1;
  std::size_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);

/// One bias-corrected Adam update of `param` in place; `step` is the
/// 1-based timestep after increment.
void adam_update(DenseMatrix& param, const DenseMatrix& grad,
                 AdamMoments& moments, std::size_t step, double learning_rate,
                 const AdamHyper& hyper = {});

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double learning_rate, const AdamHyper& hyper = {});

/// Fraction of masked nodes whose argmax output equals the label. Ties go to
/// the lowest class index. Throws ValidationError on an empty mask.
double accuracy(const DenseMatrix& probs, std::span<const int> labels,
                std::span<const std::size_t> mask);

double evaluate(const ModelParams& params, const SparseMatrix& propagator,
                const SparseMatrix& features, std::span<const int> labels,
                std::span<const std::size_t> mask);

/// Propagator and regularizer matrix for one training run.
struct PreparedGraph {
  SparseMatrix propagator;
  SparseMatrix reg_matrix;
  SparseMatrix features;  // row-normalized when configured
};

PreparedGraph prepare_graph(const TrainConfig& config,
                            const GraphDataset& dataset);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown train;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

enum class StopReason { early_stop, epoch_limit };

const char* to_string(StopReason reason);

struct TrainResult {
  std::size_t epochs_run = 0;
  StopReason stop_reason = StopReason::epoch_limit;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = the initial parameters
  double best_val_loss = 0.0;
  ModelParams best_params;
  double test_accuracy = 0.0;
  std::uint64_t seed = 0;
};

using EpochLogger = std::function<void(const EpochRecord&)>;

/// Full-batch Adam training with validation-loss early stopping. Stops once
/// epoch > min_epochs_before_stop and the validation loss has not improved
/// for `patience` epochs; the best-validation snapshot is then evaluated on
/// the test split. Throws DivergenceError on a non-finite loss.
TrainResult train(const TrainConfig& config, const GraphDataset& dataset,
                  const EpochLogger& logger = {});
TrainResult train(const TrainConfig& config, const GraphDataset& dataset,
                  const PreparedGraph& graph, const EpochLogger& logger = {});

struct RepeatedResult {
  std::vector<TrainResult> runs;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation, 0 for one run
  double mean_epochs = 0.0;
};

using RunLogger = std::function<void(std::size_t run, const EpochRecord&)>;

/// n_runs trainings with seeds base_seed, base_seed + 1, ...
RepeatedResult run_repeated(const TrainConfig& config,
                            const GraphDataset& dataset, std::size_t n_runs,
                            std::uint64_t base_seed,
                            const RunLogger& logger = {});

}  // namespace gcn
