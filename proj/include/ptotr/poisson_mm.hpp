#pragma once

#include "ptotr/tensor.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace ptotr {

/// Identity-link Poisson problem Y ~ Poisson(C D) in the unknown C.
///
/// y is J x L (nonnegative integer counts), d is R x L (fixed design) and
/// c_init is a strictly positive J x R starting iterate.
struct MmProblem {
  Matrix y;
  Matrix d;
  Matrix c_init;

  /// Throws on shape mismatches, non-integer or negative counts, negative
  /// design entries, a design row or column that sums to zero, or a
  /// non-positive starting iterate.
  void validate() const;
};

struct MmResult {
  Matrix c;
  std::vector<double> objective_trajectory;  // f(C_0), f(C_1), ...
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t floored_entries = 0;  // iterate entries lifted to the positivity floor
};

inline constexpr double kPositivityFloor = 1e-12;

/// sum_{jl} [ y log((CD)_jl) - (CD)_jl ] with 0 log(r) = 0.
double mm_objective(const Matrix& c, const MmProblem& p);

/// C * [ ((Y / CD) D^T) / (1 1^T D^T) ].
Matrix mm_step(const Matrix& c, const MmProblem& p);

/// Iterates mm_step from p.c_init until the relative change of the objective
/// drops below tol, or max_iter steps were taken.
MmResult mm_solve(const MmProblem& p, double tol = 1e-8, std::size_t max_iter = 10000);

/// Entry j is false iff row j of y has no positive count, in which case the
/// maximiser for row j of C sits on the boundary C_j = 0.
std::vector<bool> check_mle_exists(const Matrix& y);

// Building blocks shared with the factored updates of the estimator.

/// Poisson log-likelihood kernel sum [y log r - r]; throws DegenerateRateError
/// for r <= 0 at a positive count or for a negative rate.
double poisson_objective(const Matrix& y, const Matrix& rates);

/// y / rates elementwise with 0 / r = 0.
Matrix poisson_ratio(const Matrix& y, const Matrix& rates);

/// Evaluates f(C) and, when `multiplier` is non-null, writes Phi(C) into it.
using MmEvaluator = std::function<double(const Matrix& c, Matrix* multiplier)>;
/// Called after every accepted step with (iteration, iterate, objective).
using MmObserver = std::function<void(std::size_t, const Matrix&, double)>;

struct MmOptions {
  double tol = 1e-8;  // 0 disables the convergence test
  std::size_t max_iter = 10000;
  double floor = kPositivityFloor;
  MmObserver observer;
};

/// Generic multiplicative MM driver: C <- C * Phi(C), floor, repeat.
MmResult run_mm(const MmEvaluator& evaluate, Matrix c0, const MmOptions& options);

}  // namespace ptotr
