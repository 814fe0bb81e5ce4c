#pragma once

#include "ptotr/estimator.hpp"
#include "ptotr/rng.hpp"

#include <string>
#include <vector>

namespace ptotr {

/// sum [ mu log(mu / nu) - mu + nu ]; both strictly positive with equal extents.
double kl_poisson(const DenseTensor& mu, const DenseTensor& nu);

/// Largest singular value by power iteration on X^T X, stopping once the
/// relative change of the Rayleigh quotient drops below `tol`.
double spectral_norm(const Matrix& x, double tol = 1e-10, std::size_t max_iter = 100000);

/// min_i ||x_i||_1 over the columns of x.
double min_column_l1(const Matrix& x);

struct KlBoundReport {
  double lhs = 0.0;  // D_KL(Poisson(B1 X) || Poisson(B2 X))
  double rhs = 0.0;  // ||X||_2^2 / (beta xi) ||B1 - B2||_F^2
  bool pass = false;  // lhs <= rhs (1 + 1e-9)
};

/// Model y_i ~ Poisson(B x_i). x is L x I with columns x_i >= 0; b1 and b2 are
/// J x L with every entry >= beta.
KlBoundReport kl_bound_check(const Matrix& x, const Matrix& b1, const Matrix& b2, double beta);

struct KlTrialSummary {
  std::size_t trials = 0;
  std::size_t passed = 0;
  std::vector<KlBoundReport> reports;
};

/// Random instances with I, J, L in 1..3, covariates uniform on (0, 2),
/// beta uniform on (0.1, 1) and coefficient entries in (beta, beta + 3).
KlTrialSummary kl_bound_random_trials(std::size_t trials, Rng& rng);

struct BoundInputs {
  double bar_m = 0.0;
  double bar_n = 0.0;
  std::size_t p = 1;  // response order
  std::size_t q = 1;  // covariate order
  std::size_t rank = 1;
  double alpha = 0.0;
  double beta = 0.0;
  double xi = 0.0;            // min_i ||x_i||_1
  double x_spec_norm_sq = 0.0;  // ||X||_2^2

  double j() const { return bar_m > bar_n ? bar_m : bar_n; }
};

struct BoundReport {
  double bound = 0.0;
  bool condition_holds = false;
  std::vector<std::string> warnings;
};

/// (beta ln 2 / 128)(J R / 16 - 1)(xi / ||X||_2^2) together with the
/// applicability condition
/// (beta ln 2 / (alpha - beta)^2)(J R / 16 - 1)(xi / ||X||_2^2) <= bar_N^Q bar_M^P.
/// Warns when J <= 16.
BoundReport minimax_bound(const BoundInputs& in);

/// Fills xi and ||X||_2^2 from the stacked vectorized covariates of `problem`.
void fill_covariate_terms(BoundInputs& in, const PtotrProblem& problem);

enum class FactorKind { response, covariate };

struct GradientReport {
  Matrix analytic;
  Matrix numeric;
  double max_rel_error = 0.0;  // max |a - n| / max(|a|, |n|, 1)
};

/// Analytic partials of the log-likelihood with respect to U~^(mode) =
/// U^(mode) diag(lambda) (or V~^(mode)) against central differences with step
/// `epsilon`. `mode` is 1-based.
GradientReport gradient_check(const PtotrProblem& problem, const CpTensor& b, FactorKind kind, std::size_t mode,
                              double epsilon = 1e-5);

}  // namespace ptotr
