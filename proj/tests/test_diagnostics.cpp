#include "helpers.hpp"
#include "ptotr/diagnostics.hpp"
#include "ptotr/errors.hpp"

#include <Eigen/SVD>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace ptotr;
using namespace ptotr::testing;

TEST(Diagnostics, KlPoisson) {
  const DenseTensor mu({1}, 2.0);
  const DenseTensor nu({1}, 1.0);
  EXPECT_NEAR(kl_poisson(mu, nu), 2.0 * std::log(2.0) - 1.0, 1e-15);
  EXPECT_EQ(kl_poisson(mu, mu), 0.0);
  Rng rng(91);
  for (int trial = 0; trial < 100; ++trial) {
    const DenseTensor a = random_tensor({3, 2}, rng, 0.1, 5.0);
    const DenseTensor b = random_tensor({3, 2}, rng, 0.1, 5.0);
    EXPECT_GE(kl_poisson(a, b), 0.0);
  }
  EXPECT_THROW(kl_poisson(DenseTensor({1}, 0.0), nu), InvalidArgument);
}

TEST(Diagnostics, SpectralNormMatchesSvd) {
  Rng rng(92);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = random_matrix(1 + static_cast<Eigen::Index>(rng.below(6)), 1 + static_cast<Eigen::Index>(rng.below(6)), rng);
    const double ref = Eigen::JacobiSVD<Matrix>(x).singularValues()(0);
    EXPECT_NEAR(spectral_norm(x), ref, 1e-8 * ref);
  }
  Matrix x(2, 2);
  x << 1, 5, 2, 0;
  EXPECT_EQ(min_column_l1(x), 3.0);
}

TEST(Diagnostics, KlBoundCheck) {
  Rng rng(93);
  const Matrix x = random_matrix(3, 2, rng, 0.0, 2.0);
  const Matrix b1 = random_matrix(2, 3, rng, 0.5, 3.0);
  const KlBoundReport same = kl_bound_check(x, b1, b1, 0.5);
  EXPECT_EQ(same.lhs, 0.0);
  EXPECT_EQ(same.rhs, 0.0);
  EXPECT_TRUE(same.pass);

  const Matrix b2 = random_matrix(2, 3, rng, 0.5, 3.0);
  const KlBoundReport one = kl_bound_check(x, b1, b2, 0.5);
  const Matrix b3 = b1 + 2.0 * (b2 - b1);
  const KlBoundReport two = kl_bound_check(x, b1, b3, 0.5);
  EXPECT_NEAR(two.rhs, 4.0 * one.rhs, 1e-12 * two.rhs);
  EXPECT_TRUE(one.pass);

  Rng trials_rng(94);
  const KlTrialSummary sum = kl_bound_random_trials(100, trials_rng);
  EXPECT_EQ(sum.passed, 100u);
  EXPECT_THROW(kl_bound_check(x, b1, b2, 3.5), InvalidArgument);
}

TEST(Diagnostics, MinimaxBound) {
  BoundInputs in;
  in.bar_m = 32;
  in.bar_n = 1;
  in.rank = 1;
  in.alpha = 2.0;
  in.beta = 1.0;
  in.xi = 1.0;
  in.x_spec_norm_sq = 1.0;
  const BoundReport r = minimax_bound(in);
  EXPECT_NEAR(r.bound, std::numbers::ln2 / 128.0, 1e-18);
  EXPECT_NEAR(r.bound, 0.0054152, 1e-7);
  EXPECT_TRUE(r.warnings.empty());

  in.bar_m = 16;
  const BoundReport zero = minimax_bound(in);
  EXPECT_EQ(zero.bound, 0.0);
  EXPECT_FALSE(zero.warnings.empty());

  // Scalar covariate X = 1: the Poisson CP special case.
  PtotrProblem p;
  p.covariates.push_back(DenseTensor({1}, 1.0));
  p.responses.push_back(DenseTensor({40, 3}, 1.0));
  BoundInputs pcp;
  pcp.bar_m = 40;
  pcp.bar_n = 1;
  pcp.rank = 3;
  pcp.alpha = 4.0;
  pcp.beta = 0.3;
  fill_covariate_terms(pcp, p);
  EXPECT_EQ(pcp.xi, 1.0);
  EXPECT_EQ(pcp.x_spec_norm_sq, 1.0);
  EXPECT_EQ(minimax_bound(pcp).bound, 0.3 * std::numbers::ln2 / 128.0 * (40.0 * 3.0 / 16.0 - 1.0));

  double prev = -1.0;
  for (double rank = 6; rank <= 12; rank += 1) {
    pcp.rank = static_cast<std::size_t>(rank);
    const double b = minimax_bound(pcp).bound;
    EXPECT_GT(b, prev);
    prev = b;
  }
}

TEST(Diagnostics, GradientCheckRandomProblems) {
  Rng rng(95);
  for (int trial = 0; trial < 10; ++trial) {
    const SyntheticDataset ds = random_small_problem(rng);
    const CpTensor b = random_cp(ds.problem.covariate_dims(), ds.problem.response_dims(), 1 + rng.below(3), rng);
    for (std::size_t p = 1; p <= b.response_factors.size(); ++p) {
      EXPECT_LE(gradient_check(ds.problem, b, FactorKind::response, p).max_rel_error, 1e-5);
    }
    for (std::size_t q = 1; q <= b.covariate_factors.size(); ++q) {
      EXPECT_LE(gradient_check(ds.problem, b, FactorKind::covariate, q).max_rel_error, 1e-5);
    }
  }
}

TEST(Diagnostics, GradientVanishesAtExactFit) {
  PtotrProblem p;
  p.covariates.push_back(DenseTensor({1}, 1.0));
  p.responses.push_back(DenseTensor({2}, 2.0));
  CpTensor b;
  b.weights = Vector::Constant(1, 4.0);
  b.covariate_factors.push_back(Matrix::Ones(1, 1));
  b.response_factors.push_back(Matrix::Constant(2, 1, 0.5));
  const GradientReport r = gradient_check(p, b, FactorKind::response, 1);
  EXPECT_LE(r.analytic.cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE(r.numeric.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Diagnostics, GradientIsAffineInResponses) {
  Rng rng(96);
  const SyntheticDataset ds = random_small_problem(rng);
  const CpTensor b = random_cp(ds.problem.covariate_dims(), ds.problem.response_dims(), 2, rng);
  PtotrProblem doubled = ds.problem;
  PtotrProblem zero = ds.problem;
  for (auto& y : doubled.responses) y.vec() *= 2.0;
  for (auto& y : zero.responses) y = DenseTensor(y.dims(), 0.0);
  const Matrix g1 = gradient_check(ds.problem, b, FactorKind::response, 1).analytic;
  const Matrix g2 = gradient_check(doubled, b, FactorKind::response, 1).analytic;
  const Matrix g0 = gradient_check(zero, b, FactorKind::response, 1).analytic;
  // Only the log term scales with Y.
  EXPECT_LE(rel_err(g2, Matrix(2.0 * g1 - g0)), 1e-12);
}
