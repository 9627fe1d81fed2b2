// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "sting/discriminator.hpp"
#include "sting/generator.hpp"
#include "test_support.hpp"

using namespace sting;
using namespace sting::testing;

TEST(Hint, ExtremeRatios) {
  Rng rng(1);
  const Matrix m = random_mask(50, 4, 0.5, rng);
  EXPECT_TRUE(sample_hint(m, 1.0, std::uint64_t{3}) == m);
  EXPECT_TRUE(sample_hint(m, 0.0, std::uint64_t{3}).isConstant(0.5));
  EXPECT_THROW(sample_hint(m, 1.5, std::uint64_t{3}), std::invalid_argument);
  EXPECT_THROW(sample_hint(m, -0.1, std::uint64_t{3}), std::invalid_argument);
}

TEST(Hint, RevealedFractionConcentrates) {
  Rng rng(2);
  const Matrix m = random_mask(1000, 100, 0.5, rng);
  const Matrix h = sample_hint(m, 0.1, std::uint64_t{4});
  long revealed = 0;
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    ASSERT_TRUE(h.data()[i] == 0.5 || h.data()[i] == m.data()[i]);
    revealed += h.data()[i] != 0.5;
  }
  EXPECT_NEAR(static_cast<double>(revealed) / h.size(), 0.1, 0.01);
}

TEST(Discriminate, ZeroParamsGiveHalf) {
  const DiscriminatorParams p = DiscriminatorParams::zeros("d", 3, 5);
  Rng rng(3);
  const Matrix x = random_matrix(6, 3, rng);
  const Matrix h = sample_hint(random_mask(6, 3, 0.5, rng), 0.5, rng);
  EXPECT_TRUE(discriminate(x, h, p).isConstant(0.5));
}

TEST(Discriminate, ProbabilitiesAndDeterminism) {
  Rng rng(4);
  const DiscriminatorParams p = DiscriminatorParams::init("d", 3, 5, rng);
  const Matrix x = random_matrix(6, 3, rng, -20, 20);
  const Matrix h = sample_hint(random_mask(6, 3, 0.5, rng), 0.5, rng);
  const Matrix a = discriminate(x, h, p);
  ASSERT_EQ(a.rows(), 6);
  ASSERT_EQ(a.cols(), 3);
  EXPECT_GE(a.minCoeff(), 0.0);
  EXPECT_LE(a.maxCoeff(), 1.0);
  EXPECT_TRUE(a == discriminate(x, h, p));
  EXPECT_THROW(discriminate(x, Matrix::Zero(5, 3), p), std::invalid_argument);
  Matrix bad = x;
  bad(2, 1) = std::nan("");
  EXPECT_THROW(discriminate(bad, h, p), NumericError);
}

TEST(Discriminate, StepInputIsValueAndHint) {
  Rng rng(5);
  const DiscriminatorParams p = DiscriminatorParams::init("d", 2, 3, rng);
  const Matrix x = random_matrix(4, 2, rng);
  const Matrix h = sample_hint(random_mask(4, 2, 0.5, rng), 0.5, rng);
  Vector state = Vector::Zero(3);
  Matrix expected(4, 2);
  for (Eigen::Index t = 0; t < 4; ++t) {
    Vector in(4);
    in << x.row(t).transpose(), h.row(t).transpose();
    state = gru_step(in, state, p.cell);
    const Vector logit = p.out_w.value * state + p.out_b.value.col(0);
    expected.row(t) = (1.0 / (1.0 + (-logit.array()).exp())).transpose();
  }
  EXPECT_TRUE(discriminate(x, h, p).isApprox(expected, 1e-13));
}

TEST(DiscriminatorLoss, HandValues) {
  Matrix m(2, 2);
  m << 1, 0, 0, 1;
  EXPECT_EQ(loss_discriminator(m, m), -1.0);
  EXPECT_EQ(loss_discriminator(Matrix::Constant(2, 2, 0.5), m), 0.0);
  EXPECT_EQ(loss_discriminator((1.0 - m.array()).matrix(), m), 1.0);
  EXPECT_THROW(loss_discriminator(Matrix::Zero(3, 2), m), std::invalid_argument);
}

TEST(DiscriminatorLoss, FirstTermIsNegatedGeneratorLoss) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix p = random_matrix(5, 3, rng, 0, 1);
    Matrix m = random_mask(5, 3, 0.5, rng);
    // Zeroing the real cells leaves only the first term.
    Matrix fake_only = p;
    for (Eigen::Index i = 0; i < p.size(); ++i)
      if (m.data()[i] != 0.0)
        fake_only.data()[i] = 0.0;
    EXPECT_EQ(loss_discriminator(fake_only, m), -loss_generator_adversarial(p, m));
  }
}

TEST(DiscriminatorLoss, BoundedOnRandomProbabilities) {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index T = 1 + trial % 9, D = 1 + trial % 4;
    const double l = loss_discriminator(random_matrix(T, D, rng, 0, 1),
                                        random_mask(T, D, 0.5, rng));
    ASSERT_GE(l, -1.0);
    ASSERT_LE(l, 1.0);
  }
}
