// SPDX-License-Identifier: Apache-2.0
#include "sting/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <vector>

namespace sting::ad {

namespace {

bool any_needs(const Tape &t, std::initializer_list<Var> vars) {
  for (Var v : vars)
    if (t.needs(v.id))
      return true;
  return false;
}

void check_same_shape(const Matrix &a, const Matrix &b, const char *op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
}

Matrix sigmoid_of(const Matrix &a) {
  // exp(-|x|) never overflows; pick the matching stable branch per entry.
  const Eigen::ArrayXXd e = (-a.array().abs()).exp();
  const Eigen::ArrayXXd inv = (1.0 + e).inverse();
  return (a.array() >= 0.0).select(inv, e * inv).matrix();
}

} // namespace

Var Tape::push(Matrix value, bool requires_grad, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad)
    node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, {}); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, {}); }

Var Tape::parameter(const Parameter &p, bool track) {
  Var v = push(p.value, track, {});
  if (track)
    nodes_[v.id].param = &p;
  return v;
}

Matrix Tape::grad(Var v) const {
  const Node &n = nodes_[v.id];
  if (n.grad.size() == 0)
    return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix &Tape::grad_ref(int id) {
  Node &n = nodes_[id];
  if (n.grad.size() == 0)
    n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1)
    throw std::invalid_argument("backward: loss must be 1x1");
  for (Node &n : nodes_)
    n.grad.resize(0, 0);
  if (!nodes_[loss.id].requires_grad)
    return;
  grad_ref(loss.id).setConstant(1.0);
  for (int i = loss.id; i >= 0; --i) {
    Node &n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0)
      continue;
    if (n.backward)
      n.backward(*this, i);
  }
  for (Node &n : nodes_)
    if (n.param != nullptr && n.grad.size() > 0) {
      if (n.param->grad.rows() != n.grad.rows() ||
          n.param->grad.cols() != n.grad.cols())
        n.param->zero_grad();
      n.param->grad += n.grad;
    }
}

Var matmul(Tape &t, Var w, Var x) {
  const Matrix &W = t.value(w);
  const Matrix &X = t.value(x);
  if (W.cols() != X.rows())
    throw std::invalid_argument("matmul: inner dimensions disagree");
  Matrix out = W * X;
  return t.push(std::move(out), any_needs(t, {w, x}), [w, x](Tape &t, int self) {
    const Matrix &G = t.grad_ref(self);
    if (t.needs(w.id))
      t.grad_ref(w.id).noalias() += G * t.value_of(x.id).transpose();
    if (t.needs(x.id))
      t.grad_ref(x.id).noalias() += t.value_of(w.id).transpose() * G;
  });
}

Var affine(Tape &t, Var w, Var x, Var b) {
  const Matrix &W = t.value(w);
  const Matrix &X = t.value(x);
  const Matrix &Bv = t.value(b);
  if (W.cols() != X.rows() || Bv.rows() != W.rows() || Bv.cols() != 1)
    throw std::invalid_argument("affine: shape mismatch");
  Matrix out = W * X;
  out.colwise() += Bv.col(0);
  return t.push(std::move(out), any_needs(t, {w, x, b}),
                [w, x, b](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  if (t.needs(w.id))
                    t.grad_ref(w.id).noalias() +=
                        G * t.value_of(x.id).transpose();
                  if (t.needs(x.id))
                    t.grad_ref(x.id).noalias() +=
                        t.value_of(w.id).transpose() * G;
                  if (t.needs(b.id))
                    t.grad_ref(b.id) += G.rowwise().sum();
                });
}

Var add(Tape &t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "add");
  Matrix out = t.value(a) + t.value(b);
  return t.push(std::move(out), any_needs(t, {a, b}), [a, b](Tape &t, int self) {
    const Matrix &G = t.grad_ref(self);
    if (t.needs(a.id))
      t.grad_ref(a.id) += G;
    if (t.needs(b.id))
      t.grad_ref(b.id) += G;
  });
}

Var sub(Tape &t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "sub");
  Matrix out = t.value(a) - t.value(b);
  return t.push(std::move(out), any_needs(t, {a, b}), [a, b](Tape &t, int self) {
    const Matrix &G = t.grad_ref(self);
    if (t.needs(a.id))
      t.grad_ref(a.id) += G;
    if (t.needs(b.id))
      t.grad_ref(b.id) -= G;
  });
}

Var mul(Tape &t, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "mul");
  Matrix out = t.value(a).cwiseProduct(t.value(b));
  return t.push(std::move(out), any_needs(t, {a, b}), [a, b](Tape &t, int self) {
    const Matrix &G = t.grad_ref(self);
    if (t.needs(a.id))
      t.grad_ref(a.id) += G.cwiseProduct(t.value_of(b.id));
    if (t.needs(b.id))
      t.grad_ref(b.id) += G.cwiseProduct(t.value_of(a.id));
  });
}

Var scale(Tape &t, Var a, double c) {
  Matrix out = t.value(a) * c;
  return t.push(std::move(out), t.needs(a.id), [a, c](Tape &t, int self) {
    t.grad_ref(a.id) += t.grad_ref(self) * c;
  });
}

Var blend(Tape &t, const Matrix &mask, Var a, Var b) {
  check_same_shape(t.value(a), t.value(b), "blend");
  check_same_shape(mask, t.value(a), "blend");
  Matrix out = mask.cwiseProduct(t.value(a)) +
               (1.0 - mask.array()).matrix().cwiseProduct(t.value(b));
  return t.push(std::move(out), any_needs(t, {a, b}),
                [a, b, mask](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  if (t.needs(a.id))
                    t.grad_ref(a.id) += G.cwiseProduct(mask);
                  if (t.needs(b.id))
                    t.grad_ref(b.id).array() +=
                        G.array() * (1.0 - mask.array());
                });
}

Var mul_const(Tape &t, Var a, const Matrix &c) {
  check_same_shape(t.value(a), c, "mul_const");
  Matrix out = t.value(a).cwiseProduct(c);
  return t.push(std::move(out), t.needs(a.id), [a, c](Tape &t, int self) {
    t.grad_ref(a.id) += t.grad_ref(self).cwiseProduct(c);
  });
}

Var sigmoid(Tape &t, Var a) {
  Matrix out = sigmoid_of(t.value(a));
  return t.push(std::move(out), t.needs(a.id), [a](Tape &t, int self) {
    const Matrix &y = t.value_of(self);
    t.grad_ref(a.id).array() +=
        t.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(Tape &t, Var a) {
  Matrix out = t.value(a).array().tanh().matrix();
  return t.push(std::move(out), t.needs(a.id), [a](Tape &t, int self) {
    const Matrix &y = t.value_of(self);
    t.grad_ref(a.id).array() +=
        t.grad_ref(self).array() * (1.0 - y.array().square());
  });
}

Var exp(Tape &t, Var a) {
  Matrix out = t.value(a).array().exp().matrix();
  return t.push(std::move(out), t.needs(a.id), [a](Tape &t, int self) {
    t.grad_ref(a.id) += t.grad_ref(self).cwiseProduct(t.value_of(self));
  });
}

Var relu(Tape &t, Var a) {
  Matrix out = t.value(a).cwiseMax(0.0);
  return t.push(std::move(out), t.needs(a.id), [a](Tape &t, int self) {
    const Matrix &x = t.value_of(a.id);
    t.grad_ref(a.id).array() +=
        (x.array() > 0.0).select(t.grad_ref(self).array(), 0.0);
  });
}

Var concat_rows(Tape &t, const std::vector<Var> &parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_rows: no parts");
  const Eigen::Index cols = t.value(parts.front()).cols();
  Eigen::Index rows = 0;
  bool needs = false;
  for (Var p : parts) {
    if (t.value(p).cols() != cols)
      throw std::invalid_argument("concat_rows: column count mismatch");
    rows += t.value(p).rows();
    needs = needs || t.needs(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, t.value(p).rows()) = t.value(p);
    r += t.value(p).rows();
  }
  return t.push(std::move(out), needs, [parts](Tape &t, int self) {
    Eigen::Index r = 0;
    for (Var p : parts) {
      const Eigen::Index n = t.value_of(p.id).rows();
      if (t.needs(p.id))
        t.grad_ref(p.id) += t.grad_ref(self).middleRows(r, n);
      r += n;
    }
  });
}

Var concat_cols(Tape &t, const std::vector<Var> &parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_cols: no parts");
  const Eigen::Index rows = t.value(parts.front()).rows();
  Eigen::Index cols = 0;
  bool needs = false;
  for (Var p : parts) {
    if (t.value(p).rows() != rows)
      throw std::invalid_argument("concat_cols: row count mismatch");
    cols += t.value(p).cols();
    needs = needs || t.needs(p.id);
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, t.value(p).cols()) = t.value(p);
    c += t.value(p).cols();
  }
  return t.push(std::move(out), needs, [parts](Tape &t, int self) {
    Eigen::Index c = 0;
    for (Var p : parts) {
      const Eigen::Index n = t.value_of(p.id).cols();
      if (t.needs(p.id))
        t.grad_ref(p.id) += t.grad_ref(self).middleCols(c, n);
      c += n;
    }
  });
}

Var slice_cols(Tape &t, Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix &A = t.value(a);
  if (start < 0 || count < 0 || start + count > A.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  Matrix out = A.middleCols(start, count);
  return t.push(std::move(out), t.needs(a.id),
                [a, start, count](Tape &t, int self) {
                  t.grad_ref(a.id).middleCols(start, count) += t.grad_ref(self);
                });
}

Var reverse_time(Tape &t, Var a, Eigen::Index steps, Eigen::Index batch) {
  const Matrix &A = t.value(a);
  if (A.cols() != steps * batch)
    throw std::invalid_argument("reverse_time: columns != steps * batch");
  Matrix out(A.rows(), A.cols());
  for (Eigen::Index s = 0; s < steps; ++s)
    out.middleCols(s * batch, batch) =
        A.middleCols((steps - 1 - s) * batch, batch);
  return t.push(std::move(out), t.needs(a.id),
                [a, steps, batch](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  Matrix &dA = t.grad_ref(a.id);
                  for (Eigen::Index s = 0; s < steps; ++s)
                    dA.middleCols((steps - 1 - s) * batch, batch) +=
                        G.middleCols(s * batch, batch);
                });
}

Var sum(Tape &t, Var a) {
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.push(std::move(out), t.needs(a.id), [a](Tape &t, int self) {
    t.grad_ref(a.id).array() += t.grad_ref(self)(0, 0);
  });
}

Var weighted_sum(Tape &t, Var a, const RowVector &weights) {
  const Matrix &A = t.value(a);
  if (A.rows() != 1 || A.cols() != weights.size())
    throw std::invalid_argument("weighted_sum: expects a matching row vector");
  Matrix out(1, 1);
  out(0, 0) = A.row(0).dot(weights);
  return t.push(std::move(out), t.needs(a.id), [a, weights](Tape &t, int self) {
    t.grad_ref(a.id).row(0) += t.grad_ref(self)(0, 0) * weights;
  });
}

Var attention(Tape &t, Var q, Var k, Var v, Eigen::Index nq, Eigen::Index nk,
              Eigen::Index batch, Matrix *weights_out) {
  const Matrix &Q = t.value(q);
  const Matrix &K = t.value(k);
  const Matrix &V = t.value(v);
  if (Q.rows() != K.rows() || Q.rows() < 1)
    throw std::invalid_argument("attention: query/key dimensions disagree");
  if (Q.cols() != nq * batch || K.cols() != nk * batch ||
      V.cols() != nk * batch || nk < 1)
    throw std::invalid_argument("attention: sequence lengths disagree");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(Q.rows()));
  const Eigen::Index dq = Q.rows();
  const Eigen::Index dv = V.rows();

  // Row b*nq + i holds the weights of query i in sequence b. Stored
  // transposed while computing so each query's weights are contiguous.
  Matrix Pt(nk, nq * batch);
  Matrix out = Matrix::Zero(dv, nq * batch);
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index i = 0; i < nq; ++i) {
      const Eigen::Index qc = i * batch + b;
      const double *qp = Q.data() + qc * dq;
      double *pp = Pt.data() + (b * nq + i) * nk;
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < nk; ++j) {
        const double *kp = K.data() + (j * batch + b) * dq;
        double s = 0.0;
        for (Eigen::Index d = 0; d < dq; ++d)
          s += qp[d] * kp[d];
        s *= inv_sqrt;
        pp[j] = s;
        mx = std::max(mx, s);
      }
      Eigen::Map<Eigen::ArrayXd> row(pp, nk);
      row = (row - mx).exp();
      const double iz = 1.0 / row.sum();
      double *op = out.data() + qc * dv;
      for (Eigen::Index j = 0; j < nk; ++j) {
        pp[j] *= iz;
        const double w = pp[j];
        const double *vp = V.data() + (j * batch + b) * dv;
        for (Eigen::Index d = 0; d < dv; ++d)
          op[d] += w * vp[d];
      }
    }
  if (weights_out != nullptr)
    *weights_out = Pt.transpose();

  return t.push(
      std::move(out), any_needs(t, {q, k, v}),
      [q, k, v, nq, nk, batch, inv_sqrt, Pt = std::move(Pt)](Tape &t,
                                                             int self) {
        const Matrix &G = t.grad_ref(self);
        const Matrix &Q = t.value_of(q.id);
        const Matrix &K = t.value_of(k.id);
        const Matrix &V = t.value_of(v.id);
        const Eigen::Index dq = Q.rows();
        const Eigen::Index dv = V.rows();
        double *dQ = t.needs(q.id) ? t.grad_ref(q.id).data() : nullptr;
        double *dK = t.needs(k.id) ? t.grad_ref(k.id).data() : nullptr;
        double *dV = t.needs(v.id) ? t.grad_ref(v.id).data() : nullptr;
        std::vector<double> dP(static_cast<std::size_t>(nk));
        for (Eigen::Index b = 0; b < batch; ++b)
          for (Eigen::Index i = 0; i < nq; ++i) {
            const Eigen::Index qc = i * batch + b;
            const double *gp = G.data() + qc * dv;
            const double *qp = Q.data() + qc * dq;
            const double *pp = Pt.data() + (b * nq + i) * nk;
            double sdot = 0.0;
            for (Eigen::Index j = 0; j < nk; ++j) {
              const Eigen::Index kc = j * batch + b;
              const double *vp = V.data() + kc * dv;
              double s = 0.0;
              for (Eigen::Index d = 0; d < dv; ++d)
                s += gp[d] * vp[d];
              dP[j] = s;
              sdot += pp[j] * s;
              if (dV) {
                double *dvp = dV + kc * dv;
                for (Eigen::Index d = 0; d < dv; ++d)
                  dvp[d] += pp[j] * gp[d];
              }
            }
            if (!dQ && !dK)
              continue;
            for (Eigen::Index j = 0; j < nk; ++j) {
              const Eigen::Index kc = j * batch + b;
              const double ds = pp[j] * (dP[j] - sdot) * inv_sqrt;
              if (dQ) {
                const double *kp = K.data() + kc * dq;
                double *dqp = dQ + qc * dq;
                for (Eigen::Index d = 0; d < dq; ++d)
                  dqp[d] += ds * kp[d];
              }
              if (dK) {
                double *dkp = dK + kc * dq;
                for (Eigen::Index d = 0; d < dq; ++d)
                  dkp[d] += ds * qp[d];
              }
            }
          }
      });
}

Var gru_cell(Tape &t, Var x, Var h, const GruVars &w) {
  const Matrix &X = t.value(x);
  const Matrix &H = t.value(h);
  const Matrix &Wr = t.value(w.wr);
  const Matrix &Ur = t.value(w.ur);
  if (Wr.cols() != X.rows() || Ur.cols() != H.rows() ||
      Ur.rows() != H.rows() || X.cols() != H.cols())
    throw std::invalid_argument("gru_cell: shape mismatch");

  Matrix r = Wr * X;
  r.noalias() += Ur * H;
  r.colwise() += t.value(w.br).col(0);
  r = sigmoid_of(r);

  Matrix u = t.value(w.wu) * X;
  u.noalias() += t.value(w.uu) * H;
  u.colwise() += t.value(w.bu).col(0);
  u = sigmoid_of(u);

  Matrix rh = r.cwiseProduct(H);
  Matrix n = t.value(w.wn) * X;
  n.noalias() += t.value(w.un) * rh;
  n.colwise() += t.value(w.bn).col(0);
  n = n.array().tanh().matrix();

  Matrix out = (1.0 - u.array()) * n.array() + u.array() * H.array();

  const bool needs = any_needs(t, {x, h, w.wr, w.ur, w.br, w.wu, w.uu, w.bu,
                                   w.wn, w.un, w.bn});
  if (!needs)
    return t.push(std::move(out), false, {});

  return t.push(std::move(out), true,
                [x, h, w, r = std::move(r), u = std::move(u),
                 n = std::move(n), rh = std::move(rh)](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  const Matrix &X = t.value_of(x.id);
                  const Matrix &H = t.value_of(h.id);

                  Matrix dh = G.cwiseProduct(u);
                  const Matrix dn = G.cwiseProduct((1.0 - u.array()).matrix());
                  const Matrix du = G.cwiseProduct(H - n);
                  const Matrix dan =
                      (dn.array() * (1.0 - n.array().square())).matrix();
                  const Matrix dau =
                      (du.array() * u.array() * (1.0 - u.array())).matrix();

                  const Matrix drh = t.value_of(w.un.id).transpose() * dan;
                  dh += drh.cwiseProduct(r);
                  const Matrix dar = (drh.array() * H.array() * r.array() *
                                      (1.0 - r.array()))
                                         .matrix();

                  auto acc_w = [&](Var p, const Matrix &d, const Matrix &in) {
                    if (t.needs(p.id))
                      t.grad_ref(p.id).noalias() += d * in.transpose();
                  };
                  auto acc_b = [&](Var p, const Matrix &d) {
                    if (t.needs(p.id))
                      t.grad_ref(p.id) += d.rowwise().sum();
                  };
                  acc_w(w.wr, dar, X);
                  acc_w(w.ur, dar, H);
                  acc_b(w.br, dar);
                  acc_w(w.wu, dau, X);
                  acc_w(w.uu, dau, H);
                  acc_b(w.bu, dau);
                  acc_w(w.wn, dan, X);
                  acc_w(w.un, dan, rh);
                  acc_b(w.bn, dan);

                  if (t.needs(x.id)) {
                    Matrix &dx = t.grad_ref(x.id);
                    dx.noalias() += t.value_of(w.wr.id).transpose() * dar;
                    dx.noalias() += t.value_of(w.wu.id).transpose() * dau;
                    dx.noalias() += t.value_of(w.wn.id).transpose() * dan;
                  }
                  if (t.needs(h.id)) {
                    dh.noalias() += t.value_of(w.ur.id).transpose() * dar;
                    dh.noalias() += t.value_of(w.uu.id).transpose() * dau;
                    t.grad_ref(h.id) += dh;
                  }
                });
}

namespace {

/// Sums each column block's entries into per-window totals.
RowVector per_window_sum(const Matrix &a, Eigen::Index batch) {
  RowVector col_sums = a.colwise().sum();
  RowVector out = RowVector::Zero(batch);
  for (Eigen::Index c = 0; c < col_sums.size(); ++c)
    out(c % batch) += col_sums(c);
  return out;
}

void check_batch(const Matrix &a, Eigen::Index batch, const char *op) {
  if (batch < 1 || a.cols() % batch != 0)
    throw std::invalid_argument(std::string(op) +
                                ": columns not divisible by batch");
}

} // namespace

Var masked_mse(Tape &t, Var x_hat, const Matrix &x, const Matrix &mask,
               Eigen::Index batch) {
  const Matrix &Xh = t.value(x_hat);
  check_same_shape(Xh, x, "masked_mse");
  check_same_shape(Xh, mask, "masked_mse");
  check_batch(Xh, batch, "masked_mse");
  const Matrix diff = x - Xh;
  const RowVector num =
      per_window_sum(mask.cwiseProduct(diff.cwiseProduct(diff)), batch);
  const RowVector den = per_window_sum(mask, batch).cwiseMax(1.0);
  Matrix out = num.cwiseQuotient(den);
  return t.push(std::move(out), t.needs(x_hat.id),
                [x_hat, batch, coef = Matrix(-2.0 * mask.cwiseProduct(diff)),
                 den](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  Matrix &d = t.grad_ref(x_hat.id);
                  for (Eigen::Index c = 0; c < d.cols(); ++c) {
                    const Eigen::Index b = c % batch;
                    d.col(c) += coef.col(c) * (G(0, b) / den(b));
                  }
                });
}

Var mean_abs_diff(Tape &t, Var a, Var b, Eigen::Index batch) {
  const Matrix &A = t.value(a);
  const Matrix &B = t.value(b);
  check_same_shape(A, B, "mean_abs_diff");
  check_batch(A, batch, "mean_abs_diff");
  const double cells = static_cast<double>(A.size() / batch);
  Matrix out = per_window_sum((A - B).cwiseAbs(), batch) / cells;
  return t.push(std::move(out), any_needs(t, {a, b}),
                [a, b, batch, cells](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  const Matrix sign =
                      (t.value_of(a.id) - t.value_of(b.id))
                          .unaryExpr([](double d) {
                            return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                          });
                  Matrix d(sign.rows(), sign.cols());
                  for (Eigen::Index c = 0; c < d.cols(); ++c)
                    d.col(c) = sign.col(c) * (G(0, c % batch) / cells);
                  if (t.needs(a.id))
                    t.grad_ref(a.id) += d;
                  if (t.needs(b.id))
                    t.grad_ref(b.id) -= d;
                });
}

Var weighted_mean(Tape &t, Var p, const Matrix &weights, Eigen::Index batch) {
  const Matrix &P = t.value(p);
  check_same_shape(P, weights, "weighted_mean");
  check_batch(P, batch, "weighted_mean");
  const RowVector den = per_window_sum(weights, batch);
  const RowVector num = per_window_sum(weights.cwiseProduct(P), batch);
  Matrix out(1, batch);
  RowVector inv(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    inv(b) = den(b) > 0.0 ? 1.0 / den(b) : 0.0;
    out(0, b) = num(b) * inv(b);
  }
  return t.push(std::move(out), t.needs(p.id),
                [p, batch, weights, inv](Tape &t, int self) {
                  const Matrix &G = t.grad_ref(self);
                  Matrix &d = t.grad_ref(p.id);
                  for (Eigen::Index c = 0; c < d.cols(); ++c) {
                    const Eigen::Index b = c % batch;
                    d.col(c) += weights.col(c) * (G(0, b) * inv(b));
                  }
                });
}

} // namespace sting::ad
