#include "gcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcn/errors.hpp"
#include "gcn/random.hpp"

namespace gcn {

namespace {

DenseMatrix glorot(std::size_t fan_in, std::size_t fan_out, CounterRng rng) {
  const double range = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseMatrix w(fan_in, fan_out);
  for (double& v : w.data()) v = (2.0 * rng.next_double() - 1.0) * range;
  return w;
}

void relu_inplace(DenseMatrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

// Inverted dropout factors: 0 with probability `rate`, else 1/(1 − rate).
std::vector<double> dropout_factors(std::size_t count, double rate,
                                    CounterRng rng) {
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factors(count);
  for (double& f : factors) f = rng.next_double() < rate ? 0.0 : keep_scale;
  return factors;
}

// dL/dZ for Z → softmax(Z), given dL/dP.
DenseMatrix softmax_backward(const DenseMatrix& probs, const DenseMatrix& grad) {
  DenseMatrix out(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto p = probs.row(i);
    const auto g = grad.row(i);
    double dot = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * g[c];
    auto o = out.row(i);
    for (std::size_t c = 0; c < p.size(); ++c) o[c] = p[c] * (g[c] - dot);
  }
  return out;
}

const DenseMatrix& reg_input(const ForwardTrace& trace, RegTarget target) {
  return target == RegTarget::probabilities ? trace.probs : trace.logits;
}

double reg_sign(const LossConfig& loss) {
  return loss.graph_reg_kind == RegKind::transition && loss.flip_transition_sign
             ? -1.0
             : 1.0;
}

}  // namespace

ModelParams init_params(std::size_t input_dim, std::size_t hidden_dim,
                        std::size_t num_classes, double dropout_rate,
                        std::uint64_t seed) {
  if (input_dim == 0 || hidden_dim == 0 || num_classes == 0) {
    throw ValidationError("init_params: dimensions must be positive");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ValidationError("init_params: dropout_rate must lie in [0, 1)");
  }
  return {glorot(input_dim, hidden_dim, CounterRng(seed, 0x1417, 0)),
          glorot(hidden_dim, num_classes, CounterRng(seed, 0x1417, 1)),
          hidden_dim, dropout_rate};
}

DenseMatrix row_softmax(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto o = out.row(i);
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      o[c] = std::exp(z[c] - peak);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

ForwardTrace forward(const ModelParams& params, const SparseMatrix& propagator,
                     const SparseMatrix& features, ForwardMode mode) {
  const std::size_t n = features.rows();
  if (propagator.rows() != n || propagator.cols() != n) {
    throw ValidationError("forward: propagator is " +
                          std::to_string(propagator.rows()) + "x" +
                          std::to_string(propagator.cols()) + ", expected " +
                          std::to_string(n) + "x" + std::to_string(n));
  }
  if (features.cols() != params.w0.rows() ||
      params.w0.cols() != params.w1.rows()) {
    throw ValidationError("forward: weight shapes do not match features");
  }

  ForwardTrace t;
  const bool drop = mode.train && params.dropout_rate > 0.0;
  if (drop) {
    t.input_mask = dropout_factors(features.nnz(), params.dropout_rate,
                                   CounterRng(mode.seed, mode.epoch, 0));
    std::vector<double> vals(features.values().begin(), features.values().end());
    for (std::size_t p = 0; p < vals.size(); ++p) vals[p] *= t.input_mask[p];
    t.input = features.with_values(std::move(vals));
  } else {
    t.input = features;
  }

  t.hidden_pre = spmm(propagator, spmm(t.input, params.w0));
  t.hidden = t.hidden_pre;
  relu_inplace(t.hidden);

  if (drop) {
    t.hidden_mask = DenseMatrix(
        t.hidden.rows(), t.hidden.cols(),
        dropout_factors(t.hidden.size(), params.dropout_rate,
                        CounterRng(mode.seed, mode.epoch, 1)));
    t.hidden_dropped = hadamard(t.hidden, t.hidden_mask);
  } else {
    t.hidden_dropped = t.hidden;
  }

  t.logits = spmm(propagator, dense_matmul(t.hidden_dropped, params.w1));
  t.probs = row_softmax(t.logits);
  return t;
}

ForwardTrace forward(const ModelParams& params, const SparseMatrix& propagator,
                     const DenseMatrix& features, ForwardMode mode) {
  return forward(params, propagator, SparseMatrix::from_dense(features), mode);
}

CrossEntropy masked_cross_entropy(const DenseMatrix& probs,
                                  std::span<const int> labels,
                                  std::span<const std::size_t> mask) {
  if (labels.size() != probs.rows()) {
    throw ValidationError("masked_cross_entropy: label count mismatch");
  }
  CrossEntropy ce;
  for (const std::size_t node : mask) {
    if (node >= probs.rows()) {
      throw ValidationError("masked_cross_entropy: mask index " +
                            std::to_string(node) + " out of range");
    }
    const int label = labels[node];
    if (label < 0 || static_cast<std::size_t>(label) >= probs.cols()) {
      throw ValidationError("masked_cross_entropy: node " +
                            std::to_string(node) + " has no valid label");
    }
    ce.sum -= std::log(std::max(probs(node, static_cast<std::size_t>(label)),
                                kLogClamp));
  }
  ce.mean = mask.empty() ? 0.0 : ce.sum / static_cast<double>(mask.size());
  return ce;
}

double weight_decay_loss(const DenseMatrix& w0, double lambda) {
  return 0.5 * lambda * sum_squares(w0);
}

double quadratic_form_trace(const SparseMatrix& q, const DenseMatrix& f) {
  return frobenius_dot(f, spmm(q, f));
}

double laplacian_reg_loss(const SparseMatrix& laplacian, const DenseMatrix& f) {
  return quadratic_form_trace(laplacian, f);
}

double transition_reg_loss(const TransitionMatrix& p, const DenseMatrix& f) {
  return quadratic_form_trace(p.matrix, f);
}

Problem make_problem(SparseMatrix propagator, SparseMatrix features,
                     std::vector<int> labels,
                     std::vector<std::size_t> train_mask, LossConfig loss,
                     SparseMatrix reg_matrix) {
  const std::size_t n = features.rows();
  if (propagator.rows() != n || propagator.cols() != n || labels.size() != n) {
    throw ValidationError("make_problem: propagator, features and labels "
                          "disagree on the node count");
  }
  if (loss.weight_decay_lambda < 0.0 || loss.graph_reg_weight < 0.0) {
    throw ValidationError("make_problem: loss weights must be non-negative");
  }
  for (const std::size_t node : train_mask) {
    if (node >= n || labels[node] < 0) {
      throw ValidationError("make_problem: training node " +
                            std::to_string(node) + " is unlabeled or invalid");
    }
  }
  Problem p;
  p.propagator_t = transpose(propagator);
  p.propagator = std::move(propagator);
  p.features = std::move(features);
  p.labels = std::move(labels);
  p.train_mask = std::move(train_mask);
  p.loss = loss;
  if (loss.graph_reg_kind != RegKind::none) {
    if (reg_matrix.rows() != n || reg_matrix.cols() != n) {
      throw ValidationError("make_problem: regularizer matrix must be " +
                            std::to_string(n) + "x" + std::to_string(n));
    }
    p.reg_matrix_sym = add(reg_matrix, transpose(reg_matrix));
    p.reg_matrix = std::move(reg_matrix);
  }
  return p;
}

LossBreakdown total_loss(const ForwardTrace& trace, const ModelParams& params,
                         const Problem& problem) {
  LossBreakdown out;
  out.cross_entropy =
      masked_cross_entropy(trace.probs, problem.labels, problem.train_mask).mean;
  out.weight_decay = weight_decay_loss(params.w0, problem.loss.weight_decay_lambda);
  if (problem.loss.graph_reg_kind != RegKind::none) {
    out.graph_reg = reg_sign(problem.loss) *
                    quadratic_form_trace(problem.reg_matrix,
                                         reg_input(trace, problem.loss.reg_target));
  }
  out.total = out.cross_entropy + out.weight_decay +
              (problem.loss.graph_reg_kind != RegKind::none
                   ? problem.loss.graph_reg_weight * out.graph_reg
                   : 0.0);
  return out;
}

Gradients gradients(const ForwardTrace& trace, const ModelParams& params,
                    const Problem& problem) {
  const LossConfig& loss = problem.loss;
  const std::size_t n = trace.probs.rows();
  const std::size_t classes = trace.probs.cols();

  DenseMatrix d_logits(n, classes);
  if (loss.graph_reg_kind != RegKind::none && loss.graph_reg_weight != 0.0) {
    const DenseMatrix& f = reg_input(trace, loss.reg_target);
    // d/df trace(fᵀ Q f) = (Q + Qᵀ) f
    DenseMatrix d_f = scale(spmm(problem.reg_matrix_sym, f),
                            reg_sign(loss) * loss.graph_reg_weight);
    d_logits = loss.reg_target == RegTarget::probabilities
                   ? softmax_backward(trace.probs, d_f)
                   : std::move(d_f);
  }
  if (!problem.train_mask.empty()) {
    const double inv = 1.0 / static_cast<double>(problem.train_mask.size());
    for (const std::size_t node : problem.train_mask) {
      const auto p = trace.probs.row(node);
      auto d = d_logits.row(node);
      const auto label = static_cast<std::size_t>(problem.labels[node]);
      for (std::size_t c = 0; c < classes; ++c) {
        d[c] += (p[c] - (c == label ? 1.0 : 0.0)) * inv;
      }
    }
  }

  const DenseMatrix d_out1 = spmm(problem.propagator_t, d_logits);
  Gradients g;
  g.w1 = dense_matmul(transpose(trace.hidden_dropped), d_out1);

  DenseMatrix d_hidden = dense_matmul(d_out1, transpose(params.w1));
  if (trace.hidden_mask.size() != 0) d_hidden = hadamard(d_hidden, trace.hidden_mask);
  for (std::size_t k = 0; k < d_hidden.size(); ++k) {
    if (!(trace.hidden_pre.data()[k] > 0.0)) d_hidden.data()[k] = 0.0;
  }
  const DenseMatrix d_out0 = spmm(problem.propagator_t, d_hidden);
  g.w0 = spmm(transpose(trace.input), d_out0);
  if (loss.weight_decay_lambda != 0.0) {
    g.w0 = add(g.w0, scale(params.w0, loss.weight_decay_lambda));
  }
  return g;
}

}  // namespace gcn
