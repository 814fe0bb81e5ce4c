#include "ptotr/diagnostics.hpp"

#include "ptotr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ptotr {

double kl_poisson(const DenseTensor& mu, const DenseTensor& nu) {
  if (mu.dims() != nu.dims()) throw DimensionError("kl_poisson: extents differ");
  double kl = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double a = mu[k];
    const double b = nu[k];
    if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("kl_poisson: rates must be strictly positive");
    kl += a * std::log(a / b) - a + b;
  }
  return kl;
}

double spectral_norm(const Matrix& x, double tol, std::size_t max_iter) {
  if (x.size() == 0) return 0.0;
  const Matrix gram = x.transpose() * x;
  Vector v = Vector::Ones(gram.cols()) / std::sqrt(static_cast<double>(gram.cols()));
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Vector w = gram * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    const double rq = v.dot(gram * v);
    if (std::abs(rq - prev) <= tol * std::abs(rq)) return std::sqrt(rq);
    prev = rq;
  }
  return std::sqrt(prev);
}

double min_column_l1(const Matrix& x) {
  if (x.cols() == 0) throw InvalidArgument("min_column_l1: no columns");
  return x.cwiseAbs().colwise().sum().minCoeff();
}

namespace {

DenseTensor as_tensor(const Matrix& m) {
  return DenseTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                     std::vector<double>(m.data(), m.data() + m.size()));
}

}  // namespace

KlBoundReport kl_bound_check(const Matrix& x, const Matrix& b1, const Matrix& b2, double beta) {
  if (b1.rows() != b2.rows() || b1.cols() != b2.cols() || b1.cols() != x.rows()) {
    throw DimensionError("kl_bound_check: need B (J x L) and X (L x I)");
  }
  if (!(beta > 0.0)) throw InvalidArgument("kl_bound_check: beta must be positive");
  if ((b1.array() < beta).any() || (b2.array() < beta).any()) {
    throw InvalidArgument("kl_bound_check: coefficient entries fall below beta");
  }
  if ((x.array() < 0.0).any()) throw InvalidArgument("kl_bound_check: covariates must be nonnegative");
  const double xi = min_column_l1(x);
  if (!(xi > 0.0)) throw InvalidArgument("kl_bound_check: xi must be positive");
  KlBoundReport rep;
  rep.lhs = kl_poisson(as_tensor(b1 * x), as_tensor(b2 * x));
  const double s = spectral_norm(x);
  rep.rhs = s * s / (beta * xi) * (b1 - b2).squaredNorm();
  rep.pass = rep.lhs <= rep.rhs * (1.0 + 1e-9);
  return rep;
}

KlTrialSummary kl_bound_random_trials(std::size_t trials, Rng& rng) {
  KlTrialSummary sum;
  sum.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto n_i = static_cast<Eigen::Index>(1 + rng.below(3));
    const auto n_j = static_cast<Eigen::Index>(1 + rng.below(3));
    const auto n_l = static_cast<Eigen::Index>(1 + rng.below(3));
    const double beta = rng.uniform(0.1, 1.0);
    Matrix x(n_l, n_i);
    Matrix b1(n_j, n_l);
    Matrix b2(n_j, n_l);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.uniform(0.0, 2.0);
    for (Eigen::Index k = 0; k < b1.size(); ++k) b1.data()[k] = rng.uniform(beta, beta + 3.0);
    for (Eigen::Index k = 0; k < b2.size(); ++k) b2.data()[k] = rng.uniform(beta, beta + 3.0);
    sum.reports.push_back(kl_bound_check(x, b1, b2, beta));
    if (sum.reports.back().pass) ++sum.passed;
  }
  return sum;
}

BoundReport minimax_bound(const BoundInputs& in) {
  BoundReport rep;
  const double j = in.j();
  if (j <= 16.0) rep.warnings.push_back("J = max(bar_N, bar_M) <= 16: the bound is not guaranteed to apply");
  if (!(in.beta > 0.0)) rep.warnings.push_back("beta must be positive");
  if (!(in.xi > 0.0)) rep.warnings.push_back("xi must be positive");
  if (in.alpha < in.beta) rep.warnings.push_back("alpha is below beta");
  const double shape = j * static_cast<double>(in.rank) / 16.0 - 1.0;
  const double ratio = in.xi / in.x_spec_norm_sq;
  rep.bound = in.beta * std::numbers::ln2 / 128.0 * shape * ratio;
  const double lhs_core = in.beta * std::numbers::ln2 * shape * ratio;
  const double gap = (in.alpha - in.beta) * (in.alpha - in.beta);
  const double rhs = std::pow(in.bar_n, static_cast<double>(in.q)) * std::pow(in.bar_m, static_cast<double>(in.p));
  rep.condition_holds = gap > 0.0 ? lhs_core / gap <= rhs : lhs_core <= 0.0;
  return rep;
}

void fill_covariate_terms(BoundInputs& in, const PtotrProblem& problem) {
  problem.validate();
  Matrix x(static_cast<Eigen::Index>(num_elements(problem.covariate_dims())), static_cast<Eigen::Index>(problem.size()));
  for (std::size_t i = 0; i < problem.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = problem.covariates[i].vec();
  in.xi = min_column_l1(x);
  const double s = spectral_norm(x);
  in.x_spec_norm_sq = s * s;
}

namespace {

// Analytic gradient with respect to the weighted factor.
Matrix analytic_gradient(const PtotrProblem& problem, const CpTensor& b, FactorKind kind, std::size_t m0) {
  const std::size_t r = b.rank();
  const auto rr = static_cast<Eigen::Index>(r);
  if (kind == FactorKind::response) {
    const Matrix u_tilde = b.response_factors[m0] * b.weights.asDiagonal();
    const Matrix kv = khatri_rao_decreasing(b.covariate_factors, r);
    const Matrix rest_t = khatri_rao_decreasing(b.response_factors, r, m0).transpose();
    Matrix grad = Matrix::Zero(u_tilde.rows(), rr);
    for (std::size_t i = 0; i < problem.size(); ++i) {
      const Vector w = kv.transpose() * problem.covariates[i].vec();
      const Matrix g = w.asDiagonal() * rest_t;
      const Matrix rates = u_tilde * g;
      if (!(rates.array() > 0.0).all()) throw DegenerateRateError("gradient_check: non-positive rate");
      const Matrix y = matricize(problem.responses[i], m0 + 1);
      grad += (y.cwiseQuotient(rates) - Matrix::Ones(rates.rows(), rates.cols())) * g.transpose();
    }
    return grad;
  }
  const Matrix ku = khatri_rao_decreasing(b.response_factors, r);
  const Matrix kv_rest = khatri_rao_decreasing(b.covariate_factors, r, m0);
  const Matrix v_tilde = b.covariate_factors[m0] * b.weights.asDiagonal();
  const Eigen::Index n_q = v_tilde.rows();
  Matrix grad = Matrix::Zero(n_q, rr);
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const Matrix w = matricize(problem.covariates[i], m0 + 1) * kv_rest;  // N_q x R
    const Matrix s = (v_tilde.cwiseProduct(w)).colwise().sum();           // 1 x R
    const Vector rates = ku * s.transpose();
    if (!(rates.array() > 0.0).all()) throw DegenerateRateError("gradient_check: non-positive rate");
    const Vector resid = problem.responses[i].vec().cwiseQuotient(rates) - Vector::Ones(rates.size());
    const Vector a = ku.transpose() * resid;  // R
    grad += w * a.asDiagonal();
  }
  return grad;
}

}  // namespace

GradientReport gradient_check(const PtotrProblem& problem, const CpTensor& b, FactorKind kind, std::size_t mode,
                              double epsilon) {
  problem.validate();
  b.validate();
  if (!(epsilon > 0.0)) throw InvalidArgument("gradient_check: epsilon must be positive");
  auto factors_of = [](auto& cp, FactorKind k) -> auto& {
    return k == FactorKind::response ? cp.response_factors : cp.covariate_factors;
  };
  const std::size_t order = (kind == FactorKind::response ? b.response_factors : b.covariate_factors).size();
  if (mode < 1 || mode > order) throw DimensionError("gradient_check: mode out of range");
  const std::size_t m0 = mode - 1;

  GradientReport rep;
  rep.analytic = analytic_gradient(problem, b, kind, m0);

  // Same model with lambda absorbed into the selected factor.
  CpTensor base = b;
  std::vector<Matrix>& fs = factors_of(base, kind);
  fs[m0] = fs[m0] * b.weights.asDiagonal();
  base.weights = Vector::Ones(b.weights.size());

  rep.numeric.resize(rep.analytic.rows(), rep.analytic.cols());
  for (Eigen::Index c = 0; c < rep.analytic.cols(); ++c) {
    for (Eigen::Index r = 0; r < rep.analytic.rows(); ++r) {
      CpTensor plus = base;
      CpTensor minus = base;
      factors_of(plus, kind)[m0](r, c) += epsilon;
      factors_of(minus, kind)[m0](r, c) -= epsilon;
      rep.numeric(r, c) = (loglikelihood(problem, plus) - loglikelihood(problem, minus)) / (2.0 * epsilon);
    }
  }
  for (Eigen::Index k = 0; k < rep.analytic.size(); ++k) {
    const double a = rep.analytic.data()[k];
    const double n = rep.numeric.data()[k];
    rep.max_rel_error = std::max(rep.max_rel_error, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0}));
  }
  return rep;
}

}  // namespace ptotr
