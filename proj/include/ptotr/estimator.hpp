#pragma once

#include "ptotr/poisson_mm.hpp"
#include "ptotr/rng.hpp"
#include "ptotr/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ptotr {

/// I pairs (Y_i, X_i): count responses of extents M_1..M_P and nonnegative
/// covariates of extents N_1..N_Q.
struct PtotrProblem {
  std::vector<DenseTensor> responses;
  std::vector<DenseTensor> covariates;

  std::size_t size() const noexcept { return responses.size(); }
  const Dims& response_dims() const { return responses.front().dims(); }
  const Dims& covariate_dims() const { return covariates.front().dims(); }
  /// Total scalar Poisson observations, I * prod M_p.
  std::size_t num_observations() const;

  /// Non-empty, consistent extents, integer counts, nonnegative covariates
  /// each with at least one positive entry.
  void validate() const;
};

enum class ParamCountConvention {
  raw,          // R (sum N_q + sum M_p)
  constrained,  // R (sum N_q + sum M_p - (P + Q)), plus R weight terms on request
};

struct FitConfig {
  std::size_t rank = 1;
  double outer_tol = 1e-6;  // relative log-likelihood change between sweeps
  double inner_tol = 1e-4;  // relative objective change inside a factor sub-solve
  std::size_t inner_max_iter = 50;
  std::size_t outer_max_sweeps = 500;
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
  ParamCountConvention param_count = ParamCountConvention::raw;
  bool count_weight_terms = true;  // only used by the constrained convention
  std::size_t threads = 1;         // restart workers; 0 = all cores

  void validate() const;
};

struct FitResult {
  CpTensor coefficient;                   // normalized
  double loglik = 0.0;                    // constant term excluded
  std::vector<double> loglik_trajectory;  // entry 0 is the initial point, entry s is after sweep s
  double bic = 0.0;
  long long param_count = 0;
  std::vector<std::vector<std::size_t>> dne_warnings;  // per response mode, 1-based rows with no counts
  std::vector<double> restart_logliks;
  std::size_t best_restart = 0;
  std::size_t sweeps = 0;
  bool converged = false;
  std::size_t floored_entries = 0;
  std::vector<std::string> warnings;
};

/// Called with (restart, sweep, normalized coefficient) after every sweep.
/// Distinct restarts may invoke it concurrently when threads > 1.
using SweepObserver = std::function<void(std::size_t, std::size_t, const CpTensor&)>;

/// sum_{i,m} [ Y log <X_i|B> - <X_i|B> ], minus sum log(Y!) when include_constant.
double loglikelihood(const PtotrProblem& problem, const CpTensor& b, bool include_constant = false);

/// Dense MM form of the response-factor sub-problem for 1-based mode p:
/// Y = [Y_1(p) ... Y_I(p)], D = [G_1p ... G_Ip], C = U^(p) diag(lambda).
MmProblem build_response_update(const PtotrProblem& problem, const CpTensor& b, std::size_t p);

/// Row form of the covariate-factor sub-problem for 1-based mode q:
/// Y = [vec(Y_1)^T ... vec(Y_I)^T], D = [H_1q^T ... H_Iq^T], C = vec(V^(q) diag(lambda))^T.
MmProblem build_covariate_update(const PtotrProblem& problem, const CpTensor& b, std::size_t q);

/// H_iq (prod M x R N_q), column n + r N_q holding (KR of U)_{:,r} * W_iq[n, r],
/// so that H_iq vec(V~) = vec(<X_i|B>). i is 0-based.
Matrix covariate_design(const PtotrProblem& problem, const CpTensor& b, std::size_t q, std::size_t i);

/// One multiplicative update of U~^(p). The denominator is the row-sum form
/// 1 1^T D^T, which reduces to 1 (sum_i w_i)^T when the other factors are normalized.
Matrix response_update_step(const PtotrProblem& problem, const CpTensor& b, std::size_t p,
                            const Matrix& u_tilde);

/// One multiplicative update of V~^(q); the denominator sum_i H_iq^T 1 reduces
/// to sum_i W_iq for normalized response factors.
Matrix covariate_update_step(const PtotrProblem& problem, const CpTensor& b, std::size_t q,
                             const Matrix& v_tilde);

/// Alternating maximum likelihood with multi-start; returns the best restart.
FitResult fit(const PtotrProblem& problem, const FitConfig& cfg, const SweepObserver& observer = {});

double bic(double loglik, long long param_count, double n_obs);

long long parameter_count(const Dims& covariate_dims, const Dims& response_dims, std::size_t rank,
                          ParamCountConvention convention, bool count_weight_terms = true);

/// Uniform (0.1, 1) factor entries, unit weights, then normalize_cp.
CpTensor random_cp_start(const Dims& covariate_dims, const Dims& response_dims, std::size_t rank, Rng& rng);

/// 1-based response rows whose counts summed over all other modes and all
/// observations are zero, per response mode.
std::vector<std::vector<std::size_t>> response_dne_rows(const PtotrProblem& problem);

// Shared by fitters that run the alternating scheme over other data layouts.
namespace detail {

/// Runs a full alternating fit from `start`: for each sweep, for p = 1..P then
/// q = 1..Q, absorbs lambda into the factor, runs the inner MM driver with the
/// evaluator built by `make_block` and extracts lambda again; then
/// re-normalizes and evaluates `loglik`.
struct AlternatingOutcome {
  CpTensor coefficient;
  std::vector<double> trajectory;
  std::size_t sweeps = 0;
  bool converged = false;
  std::size_t floored_entries = 0;
};

using BlockFactory = std::function<MmEvaluator(const CpTensor& b, bool response, std::size_t mode0)>;
using LoglikFn = std::function<double(const CpTensor& b)>;

AlternatingOutcome run_alternating(CpTensor start, const FitConfig& cfg, const BlockFactory& make_block,
                                   const LoglikFn& loglik,
                                   const std::function<void(std::size_t, const CpTensor&)>& on_sweep = {});

/// Selects the best of several outcomes (max loglik, ties to the lowest index)
/// and fills the FitResult bookkeeping.
FitResult assemble_result(std::vector<AlternatingOutcome> outcomes, const FitConfig& cfg,
                          const Dims& covariate_dims, const Dims& response_dims, double n_obs);

}  // namespace detail

}  // namespace ptotr
