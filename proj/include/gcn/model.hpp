#pragma once

// Two-layer graph convolutional classifier
//
//   Z = softmax( M · ReLU( M · drop(X) · W0 ) · W1 )
//
// where M is the propagation operator (normalized adjacency or a k-step
// transition matrix), together with its losses and hand-derived gradients.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gcn/graph_ops.hpp"
#include "gcn/tensor.hpp"

namespace gcn {

struct ModelParams {
  DenseMatrix w0;  // input_dim × hidden_dim
  DenseMatrix w1;  // hidden_dim × num_classes
  std::size_t hidden_dim = 16;
  double dropout_rate = 0.5;

  bool operator==(const ModelParams&) const = default;
};

/// Glorot-uniform weights, U(−r, r) with r = √6 / √(fan_in + fan_out).
ModelParams init_params(std::size_t input_dim, std::size_t hidden_dim,
                        std::size_t num_classes, double dropout_rate,
                        std::uint64_t seed);

enum class RegKind { none, laplacian, transition };

/// Which matrix the graph regularizer acts on.
enum class RegTarget { probabilities, logits };

struct LossConfig {
  double weight_decay_lambda = 5e-4;
  double graph_reg_weight = 1e-3;
  RegKind graph_reg_kind = RegKind::none;
  int transition_order = 1;  // k, for RegKind::transition
  RegTarget reg_target = RegTarget::probabilities;
  // Ablation only: subtracts the transition term instead of adding it.
  bool flip_transition_sign = false;
};

struct ForwardMode {
  bool train = false;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;

  static ForwardMode eval() { return {}; }
  static ForwardMode training(std::uint64_t seed, std::uint64_t epoch) {
    return {true, seed, epoch};
  }
};

struct ForwardTrace {
  SparseMatrix input;                // drop(X)
  std::vector<double> input_mask;    // per stored entry of X; empty in eval
  DenseMatrix hidden_pre;            // M · drop(X) · W0
  DenseMatrix hidden;                // ReLU(hidden_pre)
  DenseMatrix hidden_mask;           // inverted-dropout factors; empty in eval
  DenseMatrix hidden_dropped;        // drop(hidden)
  DenseMatrix logits;                // M · drop(hidden) · W1
  DenseMatrix probs;                 // row softmax of logits
};

ForwardTrace forward(const ModelParams& params, const SparseMatrix& propagator,
                     const SparseMatrix& features, ForwardMode mode);
ForwardTrace forward(const ModelParams& params, const SparseMatrix& propagator,
                     const DenseMatrix& features, ForwardMode mode);

DenseMatrix row_softmax(const DenseMatrix& logits);

struct CrossEntropy {
  double sum = 0.0;
  double mean = 0.0;
};

inline constexpr double kLogClamp = 1e-15;

/// −Σ ln probs[l][labels[l]] over the masked nodes, probabilities clamped
/// at kLogClamp.
CrossEntropy masked_cross_entropy(const DenseMatrix& probs,
                                  std::span<const int> labels,
                                  std::span<const std::size_t> mask);

/// (λ/2) Σ w².
double weight_decay_loss(const DenseMatrix& w0, double lambda);

/// trace(fᵀ Q f).
double quadratic_form_trace(const SparseMatrix& q, const DenseMatrix& f);
/// trace(fᵀ Δ f) = ½ Σ_ij A_ij ‖f_i − f_j‖².
double laplacian_reg_loss(const SparseMatrix& laplacian, const DenseMatrix& f);
/// trace(fᵀ P^k f).
double transition_reg_loss(const TransitionMatrix& p, const DenseMatrix& f);

/// Inputs to loss and gradient evaluation that stay fixed during training.
struct Problem {
  SparseMatrix propagator;
  SparseMatrix propagator_t;
  SparseMatrix features;
  std::vector<int> labels;
  std::vector<std::size_t> train_mask;
  LossConfig loss;
  SparseMatrix reg_matrix;      // Δ or P^k; unused when kind is none
  SparseMatrix reg_matrix_sym;  // reg_matrix + reg_matrixᵀ
};

Problem make_problem(SparseMatrix propagator, SparseMatrix features,
                     std::vector<int> labels,
                     std::vector<std::size_t> train_mask, LossConfig loss,
                     SparseMatrix reg_matrix = {});

struct LossBreakdown {
  double cross_entropy = 0.0;  // mean over the training mask
  double weight_decay = 0.0;
  double graph_reg = 0.0;      // unweighted, sign applied
  double total = 0.0;
};

LossBreakdown total_loss(const ForwardTrace& trace, const ModelParams& params,
                         const Problem& problem);

struct Gradients {
  DenseMatrix w0;
  DenseMatrix w1;
};

/// Exact gradient of total_loss, reusing the dropout masks in `trace`.
Gradients gradients(const ForwardTrace& trace, const ModelParams& params,
                    const Problem& problem);

}  // namespace gcn
