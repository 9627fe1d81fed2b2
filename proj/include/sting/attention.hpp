// SPDX-License-Identifier: Apache-2.0
/**
 * @file   attention.hpp
 * @brief  Scaled dot-product, multi-head, self- and temporal attention.
 *
 * The single-sequence functions take row-per-item matrices (n x d). Weights
 * are stored in column orientation: W^Q_i is head_dim x d_model and maps a
 * column vector, i.e. the transpose of the row-vector convention.
 */
#pragma once

#include <string>
#include <vector>

#include "sting/autograd.hpp"
#include "sting/core_data.hpp"

namespace sting {

struct MultiHeadParams {
  Eigen::Index heads = 0;
  Eigen::Index model_dim = 0;
  /// ceil(model_dim / heads); W^O absorbs any excess.
  Eigen::Index head_dim = 0;
  std::vector<Parameter> wq, wk, wv; // head_dim x model_dim each
  Parameter wo;                      // model_dim x heads*head_dim

  static MultiHeadParams init(const std::string &prefix, Eigen::Index model_dim,
                              Eigen::Index heads, Rng &rng);
  /// One head with every projection equal to the identity.
  static MultiHeadParams identity(const std::string &prefix,
                                  Eigen::Index model_dim);
  ParameterList parameters();
};

/// Multi-head attention queried by a recurrent hidden state, which is first
/// mapped hidden -> d_model by a trainable affine projection.
struct TemporalAttentionParams {
  MultiHeadParams attention;
  Parameter query_w; // model_dim x hidden
  Parameter query_b; // model_dim x 1

  static TemporalAttentionParams init(const std::string &prefix,
                                      Eigen::Index model_dim,
                                      Eigen::Index hidden, Eigen::Index heads,
                                      Rng &rng);
  ParameterList parameters();
};

struct AttentionOutput {
  Matrix values;  // n_q x d_v
  Matrix weights; // n_q x n_k, rows sum to 1
};

AttentionOutput scaled_dot_attention(const Matrix &q, const Matrix &k,
                                     const Matrix &v);
Matrix multi_head(const Matrix &q, const Matrix &k, const Matrix &v,
                  const MultiHeadParams &params);
/// Context vectors: multi_head(sequence, sequence, sequence).
Matrix self_attend(const Matrix &sequence, const MultiHeadParams &params);
Vector temporal_attend(const Vector &query_state, const Matrix &context,
                       const TemporalAttentionParams &params);

namespace ad {

struct MultiHeadVars {
  std::vector<Var> wq, wk, wv;
  Var wo;
};

struct ProjectedKeys {
  std::vector<Var> keys, values;
  Eigen::Index steps = 0;
};

MultiHeadVars bind(Tape &t, const MultiHeadParams &p, bool track);

/// Per-head key/value projections of a (d_model x steps*B) sequence.
ProjectedKeys project_keys(Tape &t, const MultiHeadVars &w, Var keys,
                           Var values, Eigen::Index steps);

/// Attends nq queries per sequence against projected keys; d_model x nq*B.
Var attend(Tape &t, const MultiHeadVars &w, Var query, Eigen::Index nq,
           const ProjectedKeys &kv, Eigen::Index batch);

Var multi_head(Tape &t, const MultiHeadVars &w, Var q, Var k, Var v,
               Eigen::Index nq, Eigen::Index nk, Eigen::Index batch);

} // namespace ad
} // namespace sting
