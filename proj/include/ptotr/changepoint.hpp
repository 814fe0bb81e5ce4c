#pragma once

#include "ptotr/estimator.hpp"

#include <vector>

namespace ptotr {

/// Grouped count data for indicator-covariate (PTANOVA) fits: group j has
/// `counts[j]` observations whose responses sum to `sums[j]`. The covariate of
/// an observation in group j is the unit vector e_j of length J.
struct GroupedCounts {
  std::vector<DenseTensor> sums;
  std::vector<double> counts;

  std::size_t groups() const noexcept { return sums.size(); }
  void validate() const;
};

/// Groups {1..tau} and {tau+1..T}; tau = 0 yields the single group of the null model.
GroupedCounts group_series(const std::vector<DenseTensor>& series, std::size_t tau);

/// Same groups written as a PToTR problem with x_t = e_1 or e_2 (or the scalar 1 when tau = 0).
PtotrProblem ptanova_problem(const std::vector<DenseTensor>& series, std::size_t tau);

/// sum_j [ sum Y_j log r_j - counts_j sum r_j ], r_j = <e_j|B>. Equals the
/// per-observation log-likelihood without the constant.
double grouped_loglik(const GroupedCounts& g, const CpTensor& b);

/// Simplified covariate update: row j of V~ is multiplied by
/// [vec(Y_j) / (U v~_j)]^T U / (counts_j 1^T U).
Matrix ptanova_v_step(const GroupedCounts& g, const CpTensor& b, const Matrix& v_tilde);

/// Simplified update of U~^(p), 1-based p: numerator
/// sum_j (Y_j(p) / (U~ G_jp)) G_jp^T with G_jp = diag(v_j) U_{-p}^T, denominator
/// 1 w^T with w = sum_j counts_j v_j (scaled by the column sums of U_{-p}).
Matrix ptanova_u_step(const GroupedCounts& g, const CpTensor& b, std::size_t p, const Matrix& u_tilde);

/// Alternating fit of the grouped model with the simplified updates.
FitResult fit_ptanova(const GroupedCounts& g, const FitConfig& cfg);

struct ChangePointResult {
  std::size_t tau_hat = 0;
  std::vector<std::size_t> taus;
  std::vector<double> loglik_by_tau;
  std::vector<double> lambda_by_tau;  // 2 (l_tau - l_0)
  double null_loglik = 0.0;
  std::vector<FitResult> fits;
  FitResult null_fit;
  bool tie = false;  // several candidates share the maximum; the smallest tau won
};

/// Fits every candidate tau (1 <= tau <= T - 1) and the no-change null with
/// the same rank. Every fit draws its restarts from the same streams of
/// cfg.seed. Candidates run on cfg.threads workers; each fit is sequential.
ChangePointResult changepoint_scan(const std::vector<DenseTensor>& series, const FitConfig& cfg,
                                   std::vector<std::size_t> tau_candidates = {});

}  // namespace ptotr
