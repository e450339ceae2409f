#include "gcn/trainer.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "gcn/errors.hpp"

namespace gcn {

DivergenceError::DivergenceError(std::size_t epoch_, double ce, double wd,
                                 double reg, double tot,
                                 const std::string& context)
    : Error(context + "training diverged at epoch " + std::to_string(epoch_) +
            ": cross_entropy=" + std::to_string(ce) +
            " weight_decay=" + std::to_string(wd) +
            " graph_reg=" + std::to_string(reg) + " total=" + std::to_string(tot)),
      epoch(epoch_),
      cross_entropy(ce),
      weight_decay(wd),
      graph_reg(reg),
      total(tot) {}

void validate_config(const TrainConfig& c) {
  if (c.min_epochs_before_stop > c.max_epochs) {
    throw ValidationError("min_epochs_before_stop exceeds max_epochs");
  }
  if (c.patience < 1) throw ValidationError("patience must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (c.hidden_dim < 1) throw ValidationError("hidden_dim must be >= 1");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw ValidationError("dropout_rate must lie in [0, 1)");
  }
  if (c.loss.weight_decay_lambda < 0.0 || c.loss.graph_reg_weight < 0.0) {
    throw ValidationError("loss weights must be non-negative");
  }
  if (c.propagator.kind == PropagatorKind::transition ||
      c.loss.graph_reg_kind == RegKind::transition) {
    if (c.propagator.k < 1 && c.propagator.kind == PropagatorKind::transition) {
      throw ValidationError("transition order k must be >= 1");
    }
    if (c.loss.graph_reg_kind == RegKind::transition && c.loss.transition_order < 1) {
      throw ValidationError("regularizer transition order must be >= 1");
    }
    if (c.propagator.n_walks < 1) throw ValidationError("n_walks must be >= 1");
    if (!(c.propagator.prune_threshold >= 0.0 && c.propagator.prune_threshold < 1.0)) {
      throw ValidationError("prune_threshold must lie in [0, 1)");
    }
  }
}

AdamState make_adam_state(const ModelParams& params) {
  return {{DenseMatrix(params.w0.rows(), params.w0.cols()),
           DenseMatrix(params.w0.rows(), params.w0.cols())},
          {DenseMatrix(params.w1.rows(), params.w1.cols()),
           DenseMatrix(params.w1.rows(), params.w1.cols())},
          0};
}

void adam_update(DenseMatrix& param, const DenseMatrix& grad,
                 AdamMoments& moments, std::size_t step, double learning_rate,
                 const AdamHyper& hyper) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols() ||
      moments.m.size() != param.size() || moments.v.size() != param.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment shapes differ");
  }
  const double t = static_cast<double>(step);
  const double m_correction = 1.0 - std::pow(hyper.beta1, t);
  const double v_correction = 1.0 - std::pow(hyper.beta2, t);
  auto p = param.data();
  const auto g = grad.data();
  auto m = moments.m.data();
  auto v = moments.v.data();
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
    v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
    const double m_hat = m[k] / m_correction;
    const double v_hat = v[k] / v_correction;
    p[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double learning_rate, const AdamHyper& hyper) {
  ++state.step;
  adam_update(params.w0, grads.w0, state.w0, state.step, learning_rate, hyper);
  adam_update(params.w1, grads.w1, state.w1, state.step, learning_rate, hyper);
}

double accuracy(const DenseMatrix& probs, std::span<const int> labels,
                std::span<const std::size_t> mask) {
  if (mask.empty()) throw ValidationError("accuracy: empty mask");
  std::size_t correct = 0;
  for (const std::size_t node : mask) {
    const auto row = probs.row(node);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    if (labels[node] >= 0 && static_cast<std::size_t>(labels[node]) == best) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double evaluate(const ModelParams& params, const SparseMatrix& propagator,
                const SparseMatrix& features, std::span<const int> labels,
                std::span<const std::size_t> mask) {
  if (mask.empty()) throw ValidationError("evaluate: empty mask");
  const ForwardTrace trace =
      forward(params, propagator, features, ForwardMode::eval());
  return accuracy(trace.probs, labels, mask);
}

const char* to_string(StopReason reason) {
  return reason == StopReason::early_stop ? "early_stop" : "epoch_limit";
}

PreparedGraph prepare_graph(const TrainConfig& config,
                            const GraphDataset& dataset) {
  validate_config(config);
  const GraphOperatorSet ops = build_operators(dataset.adjacency);
  PreparedGraph g;
  g.features = SparseMatrix::from_dense(
      config.normalize_features ? row_normalize(dataset.features) : dataset.features);

  const PropagatorConfig& pc = config.propagator;
  const auto transition = [&](int k) {
    return pc.exact ? exact_transition_matrix(ops, k).matrix
                    : walk_estimated_transition_matrix(ops, k, pc.n_walks,
                                                       config.seed,
                                                       pc.prune_threshold)
                          .matrix;
  };
  g.propagator = pc.kind == PropagatorKind::transition ? transition(pc.k)
                                                       : ops.norm_adjacency;
  switch (config.loss.graph_reg_kind) {
    case RegKind::none:
      break;
    case RegKind::laplacian:
      g.reg_matrix = ops.laplacian;
      break;
    case RegKind::transition:
      g.reg_matrix = pc.kind == PropagatorKind::transition &&
                             pc.k == config.loss.transition_order
                         ? g.propagator
                         : transition(config.loss.transition_order);
      break;
  }
  return g;
}

TrainResult train(const TrainConfig& config, const GraphDataset& dataset,
                  const EpochLogger& logger) {
  return train(config, dataset, prepare_graph(config, dataset), logger);
}

TrainResult train(const TrainConfig& config, const GraphDataset& dataset,
                  const PreparedGraph& graph, const EpochLogger& logger) {
  validate_config(config);
  validate_dataset(dataset);
  if (dataset.train.empty() || dataset.val.empty() || dataset.test.empty()) {
    throw ValidationError("train: train, val and test splits must be non-empty");
  }

  const Problem problem =
      make_problem(graph.propagator, graph.features, dataset.labels,
                   dataset.train, config.loss, graph.reg_matrix);
  ModelParams params =
      init_params(dataset.num_features, config.hidden_dim, dataset.num_classes,
                  config.dropout_rate, config.seed);
  AdamState adam = make_adam_state(params);

  const auto validation_loss = [&](const ForwardTrace& eval_trace) {
    return masked_cross_entropy(eval_trace.probs, dataset.labels, dataset.val).mean;
  };

  TrainResult result;
  result.seed = config.seed;
  result.best_params = params;
  result.best_val_loss = validation_loss(
      forward(params, problem.propagator, problem.features, ForwardMode::eval()));
  result.history.reserve(std::min<std::size_t>(config.max_epochs, 8192));

  std::size_t since_improved = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const ForwardTrace trace =
        forward(params, problem.propagator, problem.features,
                ForwardMode::training(config.seed, epoch));
    const LossBreakdown loss = total_loss(trace, params, problem);
    if (!std::isfinite(loss.total)) {
      throw DivergenceError(epoch, loss.cross_entropy, loss.weight_decay,
                            loss.graph_reg, loss.total);
    }
    adam_step(params, gradients(trace, params, problem), adam,
              config.learning_rate);

    const ForwardTrace eval_trace =
        forward(params, problem.propagator, problem.features, ForwardMode::eval());
    EpochRecord record{epoch, loss, validation_loss(eval_trace),
                       accuracy(eval_trace.probs, dataset.labels, dataset.val)};
    result.history.push_back(record);
    result.epochs_run = epoch;
    if (logger) logger(record);

    if (record.val_loss < result.best_val_loss) {
      result.best_val_loss = record.val_loss;
      result.best_epoch = epoch;
      result.best_params = params;
      since_improved = 0;
    } else {
      ++since_improved;
    }
    if (epoch > config.min_epochs_before_stop && since_improved >= config.patience) {
      result.stop_reason = StopReason::early_stop;
      break;
    }
  }

  result.test_accuracy = evaluate(result.best_params, problem.propagator,
                                  problem.features, dataset.labels, dataset.test);
  return result;
}

RepeatedResult run_repeated(const TrainConfig& config,
                            const GraphDataset& dataset, std::size_t n_runs,
                            std::uint64_t base_seed, const RunLogger& logger) {
  if (n_runs < 1) throw ValidationError("run_repeated: n_runs must be >= 1");
  // Walk estimates depend on the run seed; the normalized adjacency does not.
  const bool seed_dependent =
      (config.propagator.kind == PropagatorKind::transition ||
       config.loss.graph_reg_kind == RegKind::transition) &&
      !config.propagator.exact;
  TrainConfig first = config;
  first.seed = base_seed;
  const PreparedGraph shared = prepare_graph(first, dataset);

  RepeatedResult out;
  for (std::size_t r = 0; r < n_runs; ++r) {
    TrainConfig run_config = config;
    run_config.seed = base_seed + r;
    EpochLogger run_logger;
    if (logger) run_logger = [&, r](const EpochRecord& rec) { logger(r, rec); };
    try {
      if (seed_dependent && r > 0) {
        out.runs.push_back(train(run_config, dataset,
                                 prepare_graph(run_config, dataset), run_logger));
      } else {
        out.runs.push_back(train(run_config, dataset, shared, run_logger));
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.epoch, e.cross_entropy, e.weight_decay,
                            e.graph_reg, e.total,
                            "run " + std::to_string(r) + " (seed " +
                                std::to_string(run_config.seed) + "): ");
    } catch (const Error& e) {
      throw Error("run " + std::to_string(r) + " (seed " +
                  std::to_string(run_config.seed) + "): " + e.what());
    }
  }

  double acc_sum = 0.0, epoch_sum = 0.0;
  for (const auto& run : out.runs) {
    acc_sum += run.test_accuracy;
    epoch_sum += static_cast<double>(run.epochs_run);
  }
  const auto n = static_cast<double>(n_runs);
  out.mean_accuracy = acc_sum / n;
  out.mean_epochs = epoch_sum / n;
  if (n_runs > 1) {
    double sq = 0.0;
    for (const auto& run : out.runs) {
      sq += (run.test_accuracy - out.mean_accuracy) *
            (run.test_accuracy - out.mean_accuracy);
    }
    out.std_accuracy = std::sqrt(sq / (n - 1.0));
  }
  return out;
}

}  // namespace gcn
