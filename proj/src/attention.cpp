// SPDX-License-Identifier: Apache-2.0
#include "sting/attention.hpp"

#include <stdexcept>

#include "sting/layers.hpp"

namespace sting {

MultiHeadParams MultiHeadParams::init(const std::string &prefix,
                                      Eigen::Index model_dim,
                                      Eigen::Index heads, Rng &rng) {
  if (heads < 1 || model_dim < 1)
    throw std::invalid_argument("multi-head attention needs heads >= 1 and "
                                "model_dim >= 1");
  MultiHeadParams p;
  p.heads = heads;
  p.model_dim = model_dim;
  p.head_dim = (model_dim + heads - 1) / heads;
  for (Eigen::Index i = 0; i < heads; ++i) {
    const std::string h = std::to_string(i);
    p.wq.emplace_back(prefix + "/w_q" + h,
                      uniform_init(p.head_dim, model_dim, model_dim, rng));
    p.wk.emplace_back(prefix + "/w_k" + h,
                      uniform_init(p.head_dim, model_dim, model_dim, rng));
    p.wv.emplace_back(prefix + "/w_v" + h,
                      uniform_init(p.head_dim, model_dim, model_dim, rng));
  }
  p.wo = Parameter(prefix + "/w_o",
                   uniform_init(model_dim, heads * p.head_dim,
                                heads * p.head_dim, rng));
  return p;
}

MultiHeadParams MultiHeadParams::identity(const std::string &prefix,
                                          Eigen::Index model_dim) {
  MultiHeadParams p;
  p.heads = 1;
  p.model_dim = model_dim;
  p.head_dim = model_dim;
  const Matrix I = Matrix::Identity(model_dim, model_dim);
  p.wq.emplace_back(prefix + "/w_q0", I);
  p.wk.emplace_back(prefix + "/w_k0", I);
  p.wv.emplace_back(prefix + "/w_v0", I);
  p.wo = Parameter(prefix + "/w_o", I);
  return p;
}

ParameterList MultiHeadParams::parameters() {
  ParameterList out;
  for (Eigen::Index i = 0; i < heads; ++i) {
    out.push_back(&wq[i]);
    out.push_back(&wk[i]);
    out.push_back(&wv[i]);
  }
  out.push_back(&wo);
  return out;
}

TemporalAttentionParams
TemporalAttentionParams::init(const std::string &prefix, Eigen::Index model_dim,
                              Eigen::Index hidden, Eigen::Index heads,
                              Rng &rng) {
  TemporalAttentionParams p;
  p.attention = MultiHeadParams::init(prefix, model_dim, heads, rng);
  p.query_w = Parameter(prefix + "/w_query",
                        uniform_init(model_dim, hidden, hidden, rng));
  p.query_b = Parameter(prefix + "/b_query", Matrix::Zero(model_dim, 1));
  return p;
}

ParameterList TemporalAttentionParams::parameters() {
  ParameterList out = attention.parameters();
  out.push_back(&query_w);
  out.push_back(&query_b);
  return out;
}

AttentionOutput scaled_dot_attention(const Matrix &q, const Matrix &k,
                                     const Matrix &v) {
  if (q.cols() != k.cols())
    throw std::invalid_argument("scaled_dot_attention: Q has " +
                                std::to_string(q.cols()) + " columns, K has " +
                                std::to_string(k.cols()));
  if (k.rows() != v.rows())
    throw std::invalid_argument(
        "scaled_dot_attention: K and V row counts differ");
  ad::Tape t;
  AttentionOutput out;
  const ad::Var r = ad::attention(t, t.constant(q.transpose()),
                                  t.constant(k.transpose()),
                                  t.constant(v.transpose()), q.rows(), k.rows(),
                                  1, &out.weights);
  out.values = t.value(r).transpose();
  return out;
}

Matrix multi_head(const Matrix &q, const Matrix &k, const Matrix &v,
                  const MultiHeadParams &params) {
  if (q.cols() != params.model_dim || k.cols() != params.model_dim ||
      v.cols() != params.model_dim)
    throw std::invalid_argument("multi_head: inputs must have d_model = " +
                                std::to_string(params.model_dim) + " columns");
  if (k.rows() != v.rows())
    throw std::invalid_argument("multi_head: K and V row counts differ");
  ad::Tape t;
  const auto w = ad::bind(t, params, false);
  const ad::Var r = ad::multi_head(t, w, t.constant(q.transpose()),
                                   t.constant(k.transpose()),
                                   t.constant(v.transpose()), q.rows(),
                                   k.rows(), 1);
  return t.value(r).transpose();
}

Matrix self_attend(const Matrix &sequence, const MultiHeadParams &params) {
  if (sequence.rows() < 1)
    throw std::invalid_argument("self_attend: empty sequence");
  return multi_head(sequence, sequence, sequence, params);
}

Vector temporal_attend(const Vector &query_state, const Matrix &context,
                       const TemporalAttentionParams &params) {
  if (query_state.size() != params.query_w.value.cols())
    throw std::invalid_argument("temporal_attend: query state has " +
                                std::to_string(query_state.size()) +
                                " entries, projection expects " +
                                std::to_string(params.query_w.value.cols()));
  const Vector q = params.query_w.value * query_state + params.query_b.value.col(0);
  return multi_head(q.transpose(), context, context, params.attention)
      .row(0)
      .transpose();
}

namespace ad {

MultiHeadVars bind(Tape &t, const MultiHeadParams &p, bool track) {
  MultiHeadVars w;
  for (Eigen::Index i = 0; i < p.heads; ++i) {
    w.wq.push_back(t.parameter(p.wq[i], track));
    w.wk.push_back(t.parameter(p.wk[i], track));
    w.wv.push_back(t.parameter(p.wv[i], track));
  }
  w.wo = t.parameter(p.wo, track);
  return w;
}

ProjectedKeys project_keys(Tape &t, const MultiHeadVars &w, Var keys,
                           Var values, Eigen::Index steps) {
  ProjectedKeys kv;
  kv.steps = steps;
  for (std::size_t i = 0; i < w.wk.size(); ++i) {
    kv.keys.push_back(matmul(t, w.wk[i], keys));
    kv.values.push_back(matmul(t, w.wv[i], values));
  }
  return kv;
}

Var attend(Tape &t, const MultiHeadVars &w, Var query, Eigen::Index nq,
           const ProjectedKeys &kv, Eigen::Index batch) {
  std::vector<Var> heads;
  heads.reserve(w.wq.size());
  for (std::size_t i = 0; i < w.wq.size(); ++i) {
    Var q = matmul(t, w.wq[i], query);
    heads.push_back(
        attention(t, q, kv.keys[i], kv.values[i], nq, kv.steps, batch));
  }
  Var cat = heads.size() == 1 ? heads.front() : concat_rows(t, heads);
  return matmul(t, w.wo, cat);
}

Var multi_head(Tape &t, const MultiHeadVars &w, Var q, Var k, Var v,
               Eigen::Index nq, Eigen::Index nk, Eigen::Index batch) {
  return attend(t, w, q, nq, project_keys(t, w, k, v, nk), batch);
}

} // namespace ad
} // namespace sting
