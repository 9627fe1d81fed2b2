// SPDX-License-Identifier: Apache-2.0
#include "sting/discriminator.hpp"

#include <stdexcept>

#include "sting/generator.hpp"

namespace sting {

DiscriminatorParams DiscriminatorParams::init(const std::string &prefix,
                                              Eigen::Index features,
                                              Eigen::Index hidden, Rng &rng) {
  DiscriminatorParams p;
  p.cell = GruCellParams::init(prefix + "/cell", 2 * features, hidden, rng);
  p.out_w = Parameter(prefix + "/w_out", uniform_init(features, hidden, hidden, rng));
  p.out_b = Parameter(prefix + "/b_out", Matrix::Zero(features, 1));
  return p;
}

DiscriminatorParams DiscriminatorParams::zeros(const std::string &prefix,
                                               Eigen::Index features,
                                               Eigen::Index hidden) {
  DiscriminatorParams p;
  p.cell = GruCellParams::zeros(prefix + "/cell", 2 * features, hidden);
  p.out_w = Parameter(prefix + "/w_out", Matrix::Zero(features, hidden));
  p.out_b = Parameter(prefix + "/b_out", Matrix::Zero(features, 1));
  return p;
}

ParameterList DiscriminatorParams::parameters() {
  ParameterList out = cell.parameters();
  out.push_back(&out_w);
  out.push_back(&out_b);
  return out;
}

HintMatrix sample_hint(const MaskMatrix &m, double ratio, Rng &rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw std::invalid_argument("sample_hint: ratio must lie in [0, 1]");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HintMatrix h(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      h(i, j) = u(rng) < ratio ? m(i, j) : 0.5;
  return h;
}

HintMatrix sample_hint(const MaskMatrix &m, double ratio, std::uint64_t seed) {
  Rng rng(seed);
  return sample_hint(m, ratio, rng);
}

ProbabilityMatrix discriminate(const Matrix &x_hat_refined,
                               const HintMatrix &hint,
                               const DiscriminatorParams &params) {
  if (x_hat_refined.rows() != hint.rows() || x_hat_refined.cols() != hint.cols())
    throw std::invalid_argument("discriminate: x̂ and hint shapes differ");
  if (x_hat_refined.cols() != params.features())
    throw std::invalid_argument("discriminate: feature count mismatch");
  if (!x_hat_refined.allFinite())
    throw NumericError("discriminate: non-finite input");
  const Matrix xs[] = {x_hat_refined};
  const Matrix hs[] = {hint};
  ad::Tape t;
  const ad::Var x = t.constant(pack_sequences(xs));
  const ad::Var p = ad::run_discriminator(t, params, false, x, pack_sequences(hs),
                                          x_hat_refined.rows(), 1);
  return unpack_sequences(t.value(p), x_hat_refined.rows(), 1)[0];
}

double loss_discriminator(const ProbabilityMatrix &m_hat, const MaskMatrix &m) {
  if (m_hat.rows() != m.rows() || m_hat.cols() != m.cols())
    throw std::invalid_argument("loss_discriminator: shape mismatch");
  double fake = 0.0, real = 0.0, n_fake = 0.0, n_real = 0.0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (m(i, j) != 0.0) {
        real += m_hat(i, j);
        n_real += 1.0;
      } else {
        fake += m_hat(i, j);
        n_fake += 1.0;
      }
    }
  const double fake_mean = n_fake > 0.0 ? fake / n_fake : 0.0;
  const double real_mean = n_real > 0.0 ? real / n_real : 0.0;
  return fake_mean - real_mean;
}

namespace ad {

Var run_discriminator(Tape &t, const DiscriminatorParams &params, bool track,
                      Var x_hat, const Matrix &hint, Eigen::Index steps,
                      Eigen::Index batch) {
  const Matrix &X = t.value(x_hat);
  if (X.rows() != params.features() || X.cols() != steps * batch ||
      hint.rows() != X.rows() || hint.cols() != X.cols())
    throw std::invalid_argument("discriminator: input shape mismatch");
  const GruVars cell = bind(t, params.cell, track);
  const Var out_w = t.parameter(params.out_w, track);
  const Var out_b = t.parameter(params.out_b, track);
  Var h = t.constant(Matrix::Zero(params.hidden_size(), batch));
  std::vector<Var> probs;
  probs.reserve(steps);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Var x = slice_cols(t, x_hat, s * batch, batch);
    const Var hv = t.constant(hint.middleCols(s * batch, batch));
    h = gru_cell(t, concat_rows(t, {x, hv}), h, cell);
    probs.push_back(sigmoid(t, affine(t, out_w, h, out_b)));
  }
  return concat_cols(t, probs);
}

Var discriminator_loss(Tape &t, Var m_hat, const Matrix &mask,
                       Eigen::Index batch) {
  const Matrix missing = (1.0 - mask.array()).matrix();
  return sub(t, weighted_mean(t, m_hat, missing, batch),
             weighted_mean(t, m_hat, mask, batch));
}

} // namespace ad
} // namespace sting
