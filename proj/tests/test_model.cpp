#include <cmath>
#include <random>

#include "doctest.h"
#include "gcn/errors.hpp"
#include "gcn/graph_ops.hpp"
#include "gcn/model.hpp"
#include "test_util.hpp"

using namespace gcn;
using namespace gcn::testing;

namespace {

struct Instance {
  SparseMatrix adjacency;
  GraphOperatorSet ops;
  DenseMatrix features;
  std::vector<int> labels;
  std::vector<std::size_t> train;
  ModelParams params;
};

Instance random_instance(std::size_t n, std::size_t f, std::size_t h, std::size_t c,
                         std::mt19937_64& rng) {
  Instance in;
  in.adjacency = random_graph(n, 0.4, rng);
  in.ops = build_operators(in.adjacency);
  in.features = random_dense(n, f, rng, 0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(c) - 1);
  for (std::size_t i = 0; i < n; ++i) in.labels.push_back(label(rng));
  for (std::size_t i = 0; i < n; i += 2) in.train.push_back(i);
  in.params = init_params(f, h, c, 0.5, rng());
  return in;
}

double loss_at(const ModelParams& p, const Problem& problem, ForwardMode mode) {
  return total_loss(forward(p, problem.propagator, problem.features, mode), p, problem)
      .total;
}

// Worst relative error between analytic and central-difference gradients.
double gradient_check(const Instance& in, const Problem& problem, ForwardMode mode) {
  const double h = 1e-5;
  const ForwardTrace trace =
      forward(in.params, problem.propagator, problem.features, mode);
  const Gradients g = gradients(trace, in.params, problem);
  double worst = 0.0;
  const auto check = [&](DenseMatrix ModelParams::*which, const DenseMatrix& analytic) {
    ModelParams p = in.params;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      const double saved = (p.*which).data()[k];
      (p.*which).data()[k] = saved + h;
      const double up = loss_at(p, problem, mode);
      (p.*which).data()[k] = saved - h;
      const double down = loss_at(p, problem, mode);
      (p.*which).data()[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[k];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
    }
  };
  check(&ModelParams::w0, g.w0);
  check(&ModelParams::w1, g.w1);
  return worst;
}

}  // namespace

TEST_CASE("forward with propagation disabled is a softmax of the input") {
  const DenseMatrix x = DenseMatrix::from_rows({{1, 0, 0}, {0, 0, 1}, {0, 1, 0}});
  const ModelParams p{DenseMatrix::identity(3), DenseMatrix::identity(3), 3, 0.0};
  const auto t = forward(p, SparseMatrix::identity(3), x, ForwardMode::eval());
  CHECK(max_abs_diff(t.probs, row_softmax(x)) <= 1e-15);
  const double e = std::exp(1.0);
  CHECK(t.probs(0, 0) == doctest::Approx(e / (e + 2.0)).epsilon(1e-14));
}

TEST_CASE("forward with zero output weights is uniform") {
  std::mt19937_64 rng(1);
  const auto ops = build_operators(random_graph(8, 0.3, rng));
  ModelParams p = init_params(5, 4, 3, 0.5, 3);
  p.w1 = DenseMatrix(4, 3);
  const auto t = forward(p, ops.norm_adjacency, random_dense(8, 5, rng),
                         ForwardMode::training(1, 1));
  for (const double v : t.probs.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("forward on a two-node path follows the hand-computed chain") {
  // S = [[.5,.5],[.5,.5]]; X W0 = [[.5,-1],[1.5,-3]]; S(.) = [[1,-2],[1,-2]];
  // ReLU -> [[1,0],[1,0]]; (.) W1 = [[2,-1],[2,-1]]; S(.) unchanged.
  const auto ops = build_operators(path_graph(2));
  const ModelParams p{DenseMatrix::from_rows({{0.5, -1.0}}),
                      DenseMatrix::from_rows({{2.0, -1.0}, {5.0, 7.0}}), 2, 0.0};
  const auto t = forward(p, ops.norm_adjacency, DenseMatrix::from_rows({{1.0}, {3.0}}),
                         ForwardMode::eval());
  CHECK(max_abs_diff(t.hidden_pre, DenseMatrix::from_rows({{1.0, -2.0}, {1.0, -2.0}})) <= 1e-15);
  CHECK(max_abs_diff(t.hidden, DenseMatrix::from_rows({{1.0, 0.0}, {1.0, 0.0}})) <= 1e-15);
  CHECK(max_abs_diff(t.logits, DenseMatrix::from_rows({{2.0, -1.0}, {2.0, -1.0}})) <= 1e-15);
  const double p0 = 1.0 / (1.0 + std::exp(-3.0));  // 0.95257412682...
  CHECK(t.probs(0, 0) == doctest::Approx(0.9525741268224334).epsilon(1e-14));
  CHECK(t.probs(1, 0) == doctest::Approx(p0).epsilon(1e-14));
  CHECK(t.probs(1, 1) == doctest::Approx(1.0 - p0).epsilon(1e-12));
}

TEST_CASE("forward rejects mismatched shapes") {
  const ModelParams p = init_params(3, 2, 2, 0.5, 0);
  CHECK_THROWS_AS(forward(p, SparseMatrix::identity(4), DenseMatrix(3, 3), ForwardMode::eval()),
                  ValidationError);
  CHECK_THROWS_AS(forward(p, SparseMatrix::identity(3), DenseMatrix(3, 4), ForwardMode::eval()),
                  ValidationError);
}

TEST_CASE("dropout determinism") {
  std::mt19937_64 rng(2);
  const auto in = random_instance(12, 6, 5, 3, rng);
  const SparseMatrix& s = in.ops.norm_adjacency;
  CHECK(forward(in.params, s, in.features, ForwardMode::eval()).probs ==
        forward(in.params, s, in.features, ForwardMode::eval()).probs);
  const auto a = forward(in.params, s, in.features, ForwardMode::training(4, 7));
  const auto b = forward(in.params, s, in.features, ForwardMode::training(4, 7));
  const auto c = forward(in.params, s, in.features, ForwardMode::training(4, 8));
  CHECK(a.probs == b.probs);
  CHECK(a.hidden_mask == b.hidden_mask);
  CHECK(a.hidden_mask != c.hidden_mask);
  for (const double m : a.hidden_mask.data()) CHECK((m == 0.0 || m == 2.0));
}

TEST_CASE("softmax rows are distributions even for extreme logits") {
  std::mt19937_64 rng(3);
  DenseMatrix z = random_dense(50, 7, rng, -800.0, 800.0);
  z(0, 0) = 1e308;
  const DenseMatrix p = row_softmax(z);
  CHECK(p.all_finite());
  for (const double s : row_sum(p)) CHECK(std::abs(s - 1.0) <= 1e-9);
}

TEST_CASE("forward is equivariant under node relabeling") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto in = random_instance(15, 4, 6, 3, rng);
    const auto perm = random_permutation(15, rng);
    DenseMatrix px(15, 4);
    for (std::size_t i = 0; i < 15; ++i)
      for (std::size_t j = 0; j < 4; ++j) px(perm[i], j) = in.features(i, j);
    for (const SparseMatrix& m :
         {in.ops.norm_adjacency, exact_transition_matrix(in.ops, 2).matrix}) {
      const auto base = forward(in.params, m, in.features, ForwardMode::eval());
      const auto moved =
          forward(in.params, permute_symmetric(m, perm), px, ForwardMode::eval());
      for (std::size_t i = 0; i < 15; ++i)
        for (std::size_t c = 0; c < 3; ++c)
          CHECK(std::abs(moved.probs(perm[i], c) - base.probs(i, c)) <= 1e-12);
    }
  }
}

TEST_CASE("masked cross entropy") {
  const std::vector<int> one{0};
  const std::vector<std::size_t> first{0};
  CHECK(masked_cross_entropy(DenseMatrix(1, 4, 0.25), one, first).sum ==
        doctest::Approx(std::log(4.0)));
  CHECK(masked_cross_entropy(DenseMatrix::from_rows({{1.0, 0.0}}), one, first).sum == 0.0);

  const DenseMatrix probs = DenseMatrix::from_rows({{0.7, 0.3}, {0.2, 0.8}});
  const std::vector<int> labels{0, 1};
  const std::vector<std::size_t> all{0, 1};
  const auto ce = masked_cross_entropy(probs, labels, all);
  CHECK(ce.sum == doctest::Approx(-(std::log(0.7) + std::log(0.8))).epsilon(1e-14));
  CHECK(ce.mean == doctest::Approx(ce.sum / 2.0).epsilon(1e-14));

  const auto clamped =
      masked_cross_entropy(DenseMatrix::from_rows({{0.0, 1.0}}), one, first);
  CHECK(std::isfinite(clamped.sum));
  CHECK(clamped.sum == doctest::Approx(-std::log(kLogClamp)));

  const std::vector<int> unlabeled{-1};
  CHECK_THROWS_AS(masked_cross_entropy(DenseMatrix(1, 2, 0.5), unlabeled, first),
                  ValidationError);
  const std::vector<std::size_t> out_of_range{3};
  CHECK_THROWS_AS(masked_cross_entropy(DenseMatrix(1, 2, 0.5), one, out_of_range),
                  ValidationError);
}

TEST_CASE("weight decay") {
  CHECK(weight_decay_loss(DenseMatrix::from_rows({{3.0}}), 0.0) == 0.0);
  CHECK(weight_decay_loss(DenseMatrix::from_rows({{2.0}}), 1.0) == 2.0);
  std::mt19937_64 rng(5);
  const DenseMatrix w = random_dense(7, 5, rng);
  double brute = 0.0;
  for (const auto& row : to_grid(w))
    for (const double v : row) brute += v * v;
  CHECK(weight_decay_loss(w, 5e-4) == doctest::Approx(0.5 * 5e-4 * brute).epsilon(1e-13));
}

TEST_CASE("laplacian regularizer") {
  std::mt19937_64 rng(6);
  const auto ops = build_operators(random_graph(12, 0.3, rng));
  CHECK(std::abs(laplacian_reg_loss(ops.laplacian, DenseMatrix(12, 3, 0.37))) <= 1e-14);

  const SparseMatrix delta = build_operators(path_graph(2)).laplacian;
  const DenseMatrix f = DenseMatrix::identity(2);
  CHECK(laplacian_reg_loss(delta, f) == 2.0);
  // Pairwise form Σ_ij A_ij ‖f_i − f_j‖² counts the edge twice: 2 + 2.
  double pairwise = 0.0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      if (i != j) pairwise += 2.0;
  CHECK(pairwise == 4.0);

  for (int trial = 0; trial < 20; ++trial) {
    const SparseMatrix a = random_graph(10, 0.35, rng);
    const auto o = build_operators(a);
    const DenseMatrix fx = random_dense(10, 4, rng);
    const Grid ag = to_grid(a), fg = to_grid(fx);
    double sum = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
      for (std::size_t j = 0; j < 10; ++j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < 4; ++c) d2 += (fg[i][c] - fg[j][c]) * (fg[i][c] - fg[j][c]);
        sum += ag[i][j] * d2;
      }
    const double trace = laplacian_reg_loss(o.laplacian, fx);
    CHECK(std::abs(trace - 0.5 * sum) <= 1e-12);
    CHECK(trace >= 0.0);
  }
}

TEST_CASE("transition regularizer") {
  const auto k1 = exact_transition_matrix(build_operators(SparseMatrix(1, 1)), 2);
  CHECK(transition_reg_loss(k1, DenseMatrix::from_rows({{1.0, 0.0}})) == 1.0);
  const auto edge = exact_transition_matrix(build_operators(path_graph(2)), 1);
  CHECK(transition_reg_loss(edge, DenseMatrix::identity(2)) == 1.0);

  std::mt19937_64 rng(7);
  const auto p = exact_transition_matrix(build_operators(random_graph(9, 0.3, rng)), 3);
  const DenseMatrix f = random_dense(9, 3, rng);
  const Grid triple = grid_matmul(grid_transpose(to_grid(f)),
                                  grid_matmul(to_grid(p.matrix), to_grid(f)));
  double trace = 0.0;
  for (std::size_t c = 0; c < 3; ++c) trace += triple[c][c];
  CHECK(std::abs(transition_reg_loss(p, f) - trace) <= 1e-12);
}

TEST_CASE("total loss composition") {
  std::mt19937_64 rng(8);
  const auto in = random_instance(10, 5, 4, 3, rng);
  const SparseMatrix& s = in.ops.norm_adjacency;
  const auto trace = forward(in.params, s, in.features, ForwardMode::eval());
  const SparseMatrix feats = SparseMatrix::from_dense(in.features);

  LossConfig off;
  off.weight_decay_lambda = 0.0;
  const Problem plain = make_problem(s, feats, in.labels, in.train, off);
  CHECK(total_loss(trace, in.params, plain).total ==
        masked_cross_entropy(trace.probs, in.labels, in.train).mean);

  LossConfig zero_lap = off;
  zero_lap.graph_reg_kind = RegKind::laplacian;
  zero_lap.graph_reg_weight = 0.0;
  const Problem lap0 = make_problem(s, feats, in.labels, in.train, zero_lap, in.ops.laplacian);
  CHECK(total_loss(trace, in.params, lap0).total == total_loss(trace, in.params, plain).total);

  LossConfig full;
  full.weight_decay_lambda = 0.01;
  full.graph_reg_weight = 0.3;
  full.graph_reg_kind = RegKind::transition;
  full.transition_order = 2;
  const auto p2 = exact_transition_matrix(in.ops, 2);
  const Problem pr = make_problem(s, feats, in.labels, in.train, full, p2.matrix);
  const auto lb = total_loss(trace, in.params, pr);
  const double expected = masked_cross_entropy(trace.probs, in.labels, in.train).mean +
                          weight_decay_loss(in.params.w0, 0.01) +
                          0.3 * transition_reg_loss(p2, trace.probs);
  CHECK(lb.total == doctest::Approx(expected).epsilon(1e-14));

  full.flip_transition_sign = true;
  const Problem flipped = make_problem(s, feats, in.labels, in.train, full, p2.matrix);
  CHECK(total_loss(trace, in.params, flipped).graph_reg == -lb.graph_reg);
}

TEST_CASE("gradients: weight decay alone") {
  std::mt19937_64 rng(9);
  const auto in = random_instance(6, 4, 3, 2, rng);
  LossConfig cfg;
  cfg.weight_decay_lambda = 0.7;
  const Problem problem = make_problem(in.ops.norm_adjacency, SparseMatrix::from_dense(in.features),
                                       in.labels, {}, cfg);
  const auto g = gradients(forward(in.params, problem.propagator, problem.features,
                                   ForwardMode::eval()),
                           in.params, problem);
  CHECK(max_abs_diff(g.w0, scale(in.params.w0, 0.7)) == 0.0);
  for (const double v : g.w1.data()) CHECK(v == 0.0);
}

TEST_CASE("gradients: single node without graph reduces to a softmax classifier") {
  // z0 = x W0, h = relu(z0), p = softmax(h W1):
  //   dW1 = hᵀ (p − y),  dW0 = xᵀ [((p − y) W1ᵀ) ∘ 1(z0 > 0)]
  const DenseMatrix x = DenseMatrix::from_rows({{0.5, -1.0, 2.0}});
  const ModelParams params{DenseMatrix::from_rows({{0.3, -0.2}, {0.1, 0.4}, {0.2, -0.5}}),
                           DenseMatrix::from_rows({{1.0, -1.0, 0.5}, {0.2, 0.3, -0.4}}), 2,
                           0.0};
  LossConfig cfg;
  cfg.weight_decay_lambda = 0.0;
  const Problem problem =
      make_problem(SparseMatrix::identity(1), SparseMatrix::from_dense(x), {2}, {0}, cfg);
  const auto t = forward(params, problem.propagator, problem.features, ForwardMode::eval());
  const auto g = gradients(t, params, problem);

  const double z0[2] = {0.5 * 0.3 - 0.1 + 2.0 * 0.2, 0.5 * -0.2 - 0.4 + 2.0 * -0.5};
  const double h[2] = {std::max(z0[0], 0.0), std::max(z0[1], 0.0)};
  double logits[3], p[3], total = 0.0;
  for (int c = 0; c < 3; ++c) {
    logits[c] = h[0] * params.w1(0, c) + h[1] * params.w1(1, c);
    total += std::exp(logits[c]);
  }
  for (int c = 0; c < 3; ++c) p[c] = std::exp(logits[c]) / total;
  const double r[3] = {p[0], p[1], p[2] - 1.0};
  for (int hi = 0; hi < 2; ++hi)
    for (int c = 0; c < 3; ++c) CHECK(g.w1(hi, c) == doctest::Approx(h[hi] * r[c]).epsilon(1e-13));
  for (int f = 0; f < 3; ++f)
    for (int hi = 0; hi < 2; ++hi) {
      double back = 0.0;
      for (int c = 0; c < 3; ++c) back += r[c] * params.w1(hi, c);
      const double expected = x(0, f) * back * (z0[hi] > 0.0 ? 1.0 : 0.0);
      CHECK(g.w0(f, hi) == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("gradients match central finite differences") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t n = 6 + static_cast<std::size_t>(trial);
    const auto in = random_instance(n, 5, 4, 3, rng);
    const SparseMatrix feats = SparseMatrix::from_dense(in.features);
    const auto exact2 = exact_transition_matrix(in.ops, 2);
    const auto walk2 = walk_estimated_transition_matrix(in.ops, 2, 200, rng());
    for (const SparseMatrix* prop : {&in.ops.norm_adjacency, &walk2.matrix, &exact2.matrix}) {
      for (RegKind kind : {RegKind::none, RegKind::laplacian, RegKind::transition}) {
        for (RegTarget target : {RegTarget::probabilities, RegTarget::logits}) {
          LossConfig cfg;
          cfg.weight_decay_lambda = 0.05;
          cfg.graph_reg_weight = 0.5;
          cfg.graph_reg_kind = kind;
          cfg.reg_target = target;
          cfg.transition_order = 2;
          const SparseMatrix reg = kind == RegKind::laplacian    ? in.ops.laplacian
                                   : kind == RegKind::transition ? walk2.matrix
                                                                 : SparseMatrix{};
          const Problem problem = make_problem(*prop, feats, in.labels, in.train, cfg, reg);
          CAPTURE(trial);
          CAPTURE(static_cast<int>(kind));
          CAPTURE(static_cast<int>(target));
          CHECK(gradient_check(in, problem, ForwardMode::training(3, 1 + trial)) < 1e-4);
          CHECK(gradient_check(in, problem, ForwardMode::eval()) < 1e-4);
        }
      }
    }
  }
}

TEST_CASE("make_problem validation") {
  const SparseMatrix s = SparseMatrix::identity(3);
  const SparseMatrix x = SparseMatrix::identity(3);
  CHECK_THROWS_AS(make_problem(s, x, {0, 1}, {}, {}), ValidationError);
  CHECK_THROWS_AS(make_problem(s, x, {0, -1, 1}, {1}, {}), ValidationError);
  LossConfig lap;
  lap.graph_reg_kind = RegKind::laplacian;
  CHECK_THROWS_AS(make_problem(s, x, {0, 1, 1}, {0}, lap), ValidationError);
  LossConfig neg;
  neg.weight_decay_lambda = -1.0;
  CHECK_THROWS_AS(make_problem(s, x, {0, 1, 1}, {0}, neg), ValidationError);
}
