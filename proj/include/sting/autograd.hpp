// SPDX-License-Identifier: Apache-2.0
/**
 * @file   autograd.hpp
 * @brief  Matrix-level reverse-mode differentiation tape.
 *
 * Every value on the tape is a dense matrix. Sequences of B windows are laid
 * out as (features x T*B) with time-major column blocks: column t*B + b holds
 * step t of window b, so one time step is a contiguous block of B columns.
 */
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sting {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  /// Written by Tape::backward through const bindings.
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

/// Non-owning ordered view of the parameters of one model or player.
using ParameterList = std::vector<Parameter *>;

namespace ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;

using BackwardFn = std::function<void(Tape &, int self)>;

class Tape {
public:
  Tape() { nodes_.reserve(4096); }

  Var constant(Matrix value);
  Var variable(Matrix value);
  /// Binds a parameter. When `track` is false it enters as a constant;
  /// otherwise backward() accumulates into p.grad.
  Var parameter(const Parameter &p, bool track = true);

  const Matrix &value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of the last backward() pass; zeros if never reached.
  Matrix grad(Var v) const;

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 loss and propagates. Parameter
  /// leaves accumulate into Parameter::grad.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(Matrix value, bool requires_grad, BackwardFn fn);
  Matrix &grad_ref(int id);
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }
  const Matrix &value_of(int id) const { return nodes_[id].value; }
  bool needs(int id) const { return nodes_[id].requires_grad; }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
    const Parameter *param = nullptr;
  };
  std::vector<Node> nodes_;
};

// Elementwise and linear algebra ops.
Var matmul(Tape &t, Var w, Var x);
/// w * x + b (b broadcast over columns).
Var affine(Tape &t, Var w, Var x, Var b);
Var add(Tape &t, Var a, Var b);
Var sub(Tape &t, Var a, Var b);
Var mul(Tape &t, Var a, Var b);
Var scale(Tape &t, Var a, double c);
/// mask ⊙ a + (1 − mask) ⊙ b for a constant mask.
Var blend(Tape &t, const Matrix &mask, Var a, Var b);
/// a ⊙ c for a constant matrix c.
Var mul_const(Tape &t, Var a, const Matrix &c);
Var sigmoid(Tape &t, Var a);
Var tanh(Tape &t, Var a);
Var exp(Tape &t, Var a);
Var relu(Tape &t, Var a);

// Shape ops.
Var concat_rows(Tape &t, const std::vector<Var> &parts);
Var concat_cols(Tape &t, const std::vector<Var> &parts);
Var slice_cols(Tape &t, Var a, Eigen::Index start, Eigen::Index count);
/// Reverses the order of T column blocks of width `batch`.
Var reverse_time(Tape &t, Var a, Eigen::Index steps, Eigen::Index batch);

// Reductions.
Var sum(Tape &t, Var a);
/// Sums a row vector weighted by constant weights: sum_j w_j a_j (1x1).
Var weighted_sum(Tape &t, Var a, const RowVector &weights);

/// Fused scaled dot-product attention over a batch of independent sequences.
/// q: dk x (nq*B), k: dk x (nk*B), v: dv x (nk*B); result dv x (nq*B).
/// Row-softmax weights are written to `weights_out` (if non-null) as B
/// stacked nq x nk blocks.
Var attention(Tape &t, Var q, Var k, Var v, Eigen::Index nq, Eigen::Index nk,
              Eigen::Index batch, Matrix *weights_out = nullptr);

/// Fused GRU cell:
///   r = σ(Wr x + Ur h + br), u = σ(Wu x + Uu h + bu),
///   n = tanh(Wn x + Un (r ⊙ h) + bn), h_next = (1 − u) ⊙ n + u ⊙ h.
struct GruVars {
  Var wr, ur, br, wu, uu, bu, wn, un, bn;
};
Var gru_cell(Tape &t, Var x, Var h, const GruVars &w);

// Per-window losses. All take sequence layouts (D x T*B) and return a 1xB row.

/// Σ m (x − x̂)² / max(1, Σ m) per window.
Var masked_mse(Tape &t, Var x_hat, const Matrix &x, const Matrix &mask,
               Eigen::Index batch);
/// Mean |a − b| over all cells per window.
Var mean_abs_diff(Tape &t, Var a, Var b, Eigen::Index batch);
/// Σ w p / Σ w per window, 0 when Σ w = 0.
Var weighted_mean(Tape &t, Var p, const Matrix &weights, Eigen::Index batch);

} // namespace ad
} // namespace sting
