#include "ptotr/estimator.hpp"

#include "ptotr/errors.hpp"
#include "ptotr/parallel.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace ptotr {

std::size_t PtotrProblem::num_observations() const {
  if (responses.empty()) return 0;
  return responses.size() * num_elements(response_dims());
}

void PtotrProblem::validate() const {
  if (responses.empty()) throw InvalidArgument("PToTR problem has no observations");
  if (responses.size() != covariates.size()) {
    throw DimensionError("PToTR problem: response and covariate counts differ");
  }
  const Dims& rd = response_dims();
  const Dims& cd = covariate_dims();
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (responses[i].dims() != rd) throw DimensionError("response " + std::to_string(i + 1) + " has different extents");
    if (covariates[i].dims() != cd) throw DimensionError("covariate " + std::to_string(i + 1) + " has different extents");
    for (double v : responses[i].values()) {
      if (!(v >= 0.0) || v != std::floor(v)) {
        throw InvalidArgument("response " + std::to_string(i + 1) + " has a non-count entry");
      }
    }
    bool positive = false;
    for (double v : covariates[i].values()) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw InvalidArgument("covariate " + std::to_string(i + 1) + " has a negative or non-finite entry");
      }
      positive = positive || v > 0.0;
    }
    if (!positive) throw InvalidArgument("covariate " + std::to_string(i + 1) + " has no positive entry");
  }
}

void FitConfig::validate() const {
  if (rank < 1) throw InvalidArgument("rank must be >= 1");
  if (!(outer_tol > 0.0) || !(inner_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (inner_max_iter < 1 || outer_max_sweeps < 1) throw InvalidArgument("iteration budgets must be >= 1");
  if (restarts < 1) throw InvalidArgument("restarts must be >= 1");
}

namespace {

// Problem data laid out once per fit.
struct FitData {
  Dims cov_dims;
  Dims resp_dims;
  std::size_t n_obs = 0;
  Matrix x;                       // prod N x I, column i = vec(X_i)
  Matrix y;                       // prod M x I, column i = vec(Y_i)
  std::vector<Matrix> y_stacked;  // per response mode: [Y_1(p) ... Y_I(p)]
  const PtotrProblem* problem = nullptr;

  explicit FitData(const PtotrProblem& pr) : cov_dims(pr.covariate_dims()), resp_dims(pr.response_dims()),
                                             n_obs(pr.size()), problem(&pr) {
    const auto nx = static_cast<Eigen::Index>(num_elements(cov_dims));
    const auto ny = static_cast<Eigen::Index>(num_elements(resp_dims));
    const auto ni = static_cast<Eigen::Index>(n_obs);
    x.resize(nx, ni);
    y.resize(ny, ni);
    for (Eigen::Index i = 0; i < ni; ++i) {
      x.col(i) = pr.covariates[static_cast<std::size_t>(i)].vec();
      y.col(i) = pr.responses[static_cast<std::size_t>(i)].vec();
    }
    for (std::size_t p = 0; p < resp_dims.size(); ++p) {
      const auto rows = static_cast<Eigen::Index>(resp_dims[p]);
      const Eigen::Index rest = ny / rows;
      Matrix stacked(rows, rest * ni);
      for (Eigen::Index i = 0; i < ni; ++i) {
        stacked.middleCols(i * rest, rest) = matricize(pr.responses[static_cast<std::size_t>(i)], p + 1);
      }
      y_stacked.push_back(std::move(stacked));
    }
  }
};

void check_shapes(const FitData& data, const CpTensor& b) {
  b.validate();
  if (b.covariate_dims() != data.cov_dims || b.response_dims() != data.resp_dims) {
    throw DimensionError("coefficient extents do not match the problem");
  }
}

// Response-mode sub-problem: rates = U~ D with D = [G_1p ... G_Ip].
struct ResponseBlock {
  const FitData& data;
  std::size_t mode;
  Matrix d;
  Vector d_row_sums;

  ResponseBlock(const FitData& fd, const CpTensor& b, std::size_t p0) : data(fd), mode(p0) {
    const std::size_t r = b.rank();
    const Matrix kv = khatri_rao_decreasing(b.covariate_factors, r);
    const Matrix w = kv.transpose() * data.x;  // R x I
    const Matrix krest_t = khatri_rao_decreasing(b.response_factors, r, p0).transpose();
    const Eigen::Index rest = krest_t.cols();
    d.resize(static_cast<Eigen::Index>(r), rest * w.cols());
    for (Eigen::Index i = 0; i < w.cols(); ++i) {
      d.middleCols(i * rest, rest) = w.col(i).asDiagonal() * krest_t;
    }
    d_row_sums = d.rowwise().sum();
  }

  double evaluate(const Matrix& u_tilde, Matrix* phi) const {
    const Matrix& y = data.y_stacked[mode];
    const Matrix rates = u_tilde * d;
    const double f = poisson_objective(y, rates);
    if (phi) {
      *phi = poisson_ratio(y, rates) * d.transpose();
      for (Eigen::Index r = 0; r < phi->cols(); ++r) {
        if (d_row_sums[r] > 0.0) {
          phi->col(r) /= d_row_sums[r];
        } else {
          phi->col(r).setOnes();
        }
      }
    }
    return f;
  }
};

// Covariate-mode sub-problem in factored form. Column i of `w_stack` is
// vec(W_iq), W_iq = X_i(q) (KR of the other V factors).
struct CovariateBlock {
  const FitData& data;
  Eigen::Index n_q;
  Matrix ku;
  Matrix w_stack;  // (N_q R) x I
  Matrix denom;    // N_q x R, sum_i H_iq^T 1

  CovariateBlock(const FitData& fd, const CpTensor& b, std::size_t q0) : data(fd) {
    const std::size_t r = b.rank();
    n_q = static_cast<Eigen::Index>(data.cov_dims[q0]);
    ku = khatri_rao_decreasing(b.response_factors, r);
    const Matrix kv_rest = khatri_rao_decreasing(b.covariate_factors, r, q0);
    const Eigen::Index ni = data.x.cols();
    const Eigen::Index rest = data.x.rows() / n_q;
    w_stack.resize(n_q * static_cast<Eigen::Index>(r), ni);
    Matrix w(n_q, static_cast<Eigen::Index>(r));
    for (Eigen::Index i = 0; i < ni; ++i) {
      if (q0 == 0) {
        Eigen::Map<const Matrix> unfolded(data.x.col(i).data(), n_q, rest);
        w.noalias() = unfolded * kv_rest;
      } else {
        w.noalias() = matricize(data.problem->covariates[static_cast<std::size_t>(i)], q0 + 1) * kv_rest;
      }
      w_stack.col(i) = Eigen::Map<const Vector>(w.data(), w.size());
    }
    const Vector sums = w_stack.rowwise().sum();
    denom = Eigen::Map<const Matrix>(sums.data(), n_q, static_cast<Eigen::Index>(r));
    denom *= ku.colwise().sum().asDiagonal();
  }

  Matrix rates_for(const Matrix& v_tilde) const {
    const Eigen::Index r = v_tilde.cols();
    Matrix s(r, w_stack.cols());
    for (Eigen::Index k = 0; k < r; ++k) {
      s.row(k).noalias() = v_tilde.col(k).transpose() * w_stack.middleRows(k * n_q, n_q);
    }
    return ku * s;
  }

  double evaluate(const Matrix& v_tilde, Matrix* phi) const {
    const Matrix rates = rates_for(v_tilde);
    const double f = poisson_objective(data.y, rates);
    if (phi) {
      const Matrix a = ku.transpose() * poisson_ratio(data.y, rates);  // R x I
      phi->resize(n_q, v_tilde.cols());
      for (Eigen::Index k = 0; k < v_tilde.cols(); ++k) {
        phi->col(k).noalias() = w_stack.middleRows(k * n_q, n_q) * a.row(k).transpose();
      }
      for (Eigen::Index k = 0; k < phi->size(); ++k) {
        const double den = denom.data()[k];
        phi->data()[k] = den > 0.0 ? phi->data()[k] / den : 1.0;
      }
    }
    return f;
  }
};

double data_loglik(const FitData& data, const CpTensor& b) {
  const std::size_t r = b.rank();
  const Matrix kv = khatri_rao_decreasing(b.covariate_factors, r);
  const Matrix ku = khatri_rao_decreasing(b.response_factors, r);
  const Matrix rates = ku * (b.weights.asDiagonal() * (kv.transpose() * data.x));
  return poisson_objective(data.y, rates);
}

detail::BlockFactory make_factory(const FitData& data) {
  return [&data](const CpTensor& b, bool response, std::size_t mode0) -> MmEvaluator {
    if (response) {
      auto blk = std::make_shared<const ResponseBlock>(data, b, mode0);
      return [blk](const Matrix& c, Matrix* phi) { return blk->evaluate(c, phi); };
    }
    auto blk = std::make_shared<const CovariateBlock>(data, b, mode0);
    return [blk](const Matrix& c, Matrix* phi) { return blk->evaluate(c, phi); };
  };
}

std::size_t checked_mode(std::size_t mode, std::size_t order, const char* what) {
  if (mode < 1 || mode > order) throw DimensionError(std::string(what) + " mode out of range");
  return mode - 1;
}

}  // namespace

double loglikelihood(const PtotrProblem& problem, const CpTensor& b, bool include_constant) {
  problem.validate();
  b.validate();
  if (b.response_dims() != problem.response_dims()) throw DimensionError("loglikelihood: response extents differ");
  double ll = 0.0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    const DenseTensor rates = partial_contract(problem.covariates[i], b);
    const auto y = problem.responses[i].values();
    const auto r = rates.values();
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (y[k] > 0.0) {
        if (!(r[k] > 0.0)) throw DegenerateRateError("loglikelihood: zero rate at a positive count");
        ll += y[k] * std::log(r[k]);
      }
      ll -= r[k];
      if (include_constant) ll -= std::lgamma(y[k] + 1.0);
    }
  }
  return ll;
}

MmProblem build_response_update(const PtotrProblem& problem, const CpTensor& b, std::size_t p) {
  problem.validate();
  FitData data(problem);
  check_shapes(data, b);
  const std::size_t p0 = checked_mode(p, data.resp_dims.size(), "response");
  ResponseBlock blk(data, b, p0);
  return MmProblem{data.y_stacked[p0], blk.d, b.response_factors[p0] * b.weights.asDiagonal()};
}

Matrix covariate_design(const PtotrProblem& problem, const CpTensor& b, std::size_t q, std::size_t i) {
  problem.validate();
  if (i >= problem.size()) throw DimensionError("covariate_design: observation index out of range");
  const std::size_t q0 = checked_mode(q, problem.covariate_dims().size(), "covariate");
  check_shapes(FitData(problem), b);
  const std::size_t r = b.rank();
  const Matrix ku = khatri_rao_decreasing(b.response_factors, r);
  const Matrix w = matricize(problem.covariates[i], q) * khatri_rao_decreasing(b.covariate_factors, r, q0);
  const Eigen::Index n_q = w.rows();
  Matrix h(ku.rows(), n_q * static_cast<Eigen::Index>(r));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(r); ++k) {
    for (Eigen::Index n = 0; n < n_q; ++n) h.col(n + k * n_q) = ku.col(k) * w(n, k);
  }
  return h;
}

MmProblem build_covariate_update(const PtotrProblem& problem, const CpTensor& b, std::size_t q) {
  problem.validate();
  const std::size_t q0 = checked_mode(q, problem.covariate_dims().size(), "covariate");
  const Eigen::Index m = static_cast<Eigen::Index>(num_elements(problem.response_dims()));
  const Eigen::Index ni = static_cast<Eigen::Index>(problem.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(problem.covariate_dims()[q0] * b.rank());
  MmProblem out;
  out.y.resize(1, m * ni);
  out.d.resize(cols, m * ni);
  for (Eigen::Index i = 0; i < ni; ++i) {
    out.y.middleCols(i * m, m) = problem.responses[static_cast<std::size_t>(i)].vec().transpose();
    out.d.middleCols(i * m, m) = covariate_design(problem, b, q, static_cast<std::size_t>(i)).transpose();
  }
  const Matrix v_tilde = b.covariate_factors[q0] * b.weights.asDiagonal();
  out.c_init = Eigen::Map<const Matrix>(v_tilde.data(), 1, v_tilde.size());
  return out;
}

Matrix response_update_step(const PtotrProblem& problem, const CpTensor& b, std::size_t p, const Matrix& u_tilde) {
  problem.validate();
  FitData data(problem);
  check_shapes(data, b);
  const std::size_t p0 = checked_mode(p, data.resp_dims.size(), "response");
  if (u_tilde.rows() != b.response_factors[p0].rows() || u_tilde.cols() != static_cast<Eigen::Index>(b.rank())) {
    throw DimensionError("response_update_step: U~ has the wrong shape");
  }
  ResponseBlock blk(data, b, p0);
  Matrix phi;
  blk.evaluate(u_tilde, &phi);
  return u_tilde.cwiseProduct(phi);
}

Matrix covariate_update_step(const PtotrProblem& problem, const CpTensor& b, std::size_t q, const Matrix& v_tilde) {
  problem.validate();
  FitData data(problem);
  check_shapes(data, b);
  const std::size_t q0 = checked_mode(q, data.cov_dims.size(), "covariate");
  if (v_tilde.rows() != b.covariate_factors[q0].rows() || v_tilde.cols() != static_cast<Eigen::Index>(b.rank())) {
    throw DimensionError("covariate_update_step: V~ has the wrong shape");
  }
  CovariateBlock blk(data, b, q0);
  Matrix phi;
  blk.evaluate(v_tilde, &phi);
  return v_tilde.cwiseProduct(phi);
}

double bic(double loglik, long long param_count, double n_obs) {
  if (!(n_obs >= 1.0)) throw InvalidArgument("bic: need at least one observation");
  return static_cast<double>(param_count) * std::log(n_obs) - 2.0 * loglik;
}

long long parameter_count(const Dims& covariate_dims, const Dims& response_dims, std::size_t rank,
                          ParamCountConvention convention, bool count_weight_terms) {
  long long extent_sum = 0;
  for (std::size_t n : covariate_dims) extent_sum += static_cast<long long>(n);
  for (std::size_t m : response_dims) extent_sum += static_cast<long long>(m);
  const auto r = static_cast<long long>(rank);
  if (convention == ParamCountConvention::raw) return r * extent_sum;
  const auto factors = static_cast<long long>(covariate_dims.size() + response_dims.size());
  return r * (extent_sum - factors) + (count_weight_terms ? r : 0);
}

CpTensor random_cp_start(const Dims& covariate_dims, const Dims& response_dims, std::size_t rank, Rng& rng) {
  const auto r = static_cast<Eigen::Index>(rank);
  auto draw = [&rng, r](std::size_t rows) {
    Matrix f(static_cast<Eigen::Index>(rows), r);
    for (Eigen::Index k = 0; k < f.size(); ++k) f.data()[k] = rng.uniform(0.1, 1.0);
    return f;
  };
  CpTensor c;
  c.weights = Vector::Ones(r);
  for (std::size_t n : covariate_dims) c.covariate_factors.push_back(draw(n));
  for (std::size_t m : response_dims) c.response_factors.push_back(draw(m));
  return normalize_cp(std::move(c));
}

std::vector<std::vector<std::size_t>> response_dne_rows(const PtotrProblem& problem) {
  const Dims& rd = problem.response_dims();
  std::vector<std::vector<std::size_t>> out(rd.size());
  for (std::size_t p = 0; p < rd.size(); ++p) {
    Vector totals = Vector::Zero(static_cast<Eigen::Index>(rd[p]));
    for (const auto& y : problem.responses) totals += matricize(y, p + 1).rowwise().sum();
    const std::vector<bool> exists = check_mle_exists(totals);
    for (std::size_t m = 0; m < exists.size(); ++m) {
      if (!exists[m]) out[p].push_back(m + 1);
    }
  }
  return out;
}

namespace detail {

AlternatingOutcome run_alternating(CpTensor start, const FitConfig& cfg, const BlockFactory& make_block,
                                   const LoglikFn& loglik,
                                   const std::function<void(std::size_t, const CpTensor&)>& on_sweep) {
  AlternatingOutcome out;
  CpTensor b = normalize_cp(std::move(start));
  double ll = loglik(b);
  out.trajectory.push_back(ll);

  MmOptions inner;
  inner.tol = cfg.inner_tol;
  inner.max_iter = cfg.inner_max_iter;

  auto update = [&](Matrix& factor, bool response, std::size_t mode0) {
    const MmEvaluator eval = make_block(b, response, mode0);
    MmResult res = run_mm(eval, factor * b.weights.asDiagonal(), inner);
    out.floored_entries += res.floored_entries;
    b.weights = res.c.colwise().sum().transpose();
    factor = res.c * b.weights.cwiseInverse().asDiagonal();
  };

  for (std::size_t sweep = 1; sweep <= cfg.outer_max_sweeps; ++sweep) {
    for (std::size_t p = 0; p < b.response_factors.size(); ++p) update(b.response_factors[p], true, p);
    for (std::size_t q = 0; q < b.covariate_factors.size(); ++q) update(b.covariate_factors[q], false, q);
    b = normalize_cp(std::move(b));
    const double next = loglik(b);
    out.trajectory.push_back(next);
    out.sweeps = sweep;
    if (on_sweep) on_sweep(sweep, b);
    const bool done = std::abs(next - ll) < cfg.outer_tol * std::abs(ll);
    ll = next;
    if (done) {
      out.converged = true;
      break;
    }
  }
  out.coefficient = std::move(b);
  return out;
}

FitResult assemble_result(std::vector<AlternatingOutcome> outcomes, const FitConfig& cfg,
                          const Dims& covariate_dims, const Dims& response_dims, double n_obs) {
  FitResult res;
  std::size_t best = 0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const double ll = outcomes[k].trajectory.back();
    res.restart_logliks.push_back(ll);
    if (ll > outcomes[best].trajectory.back()) best = k;
  }
  AlternatingOutcome& win = outcomes[best];
  res.best_restart = best;
  res.loglik = win.trajectory.back();
  res.loglik_trajectory = std::move(win.trajectory);
  res.coefficient = std::move(win.coefficient);
  res.sweeps = win.sweeps;
  res.converged = win.converged;
  res.floored_entries = win.floored_entries;
  res.param_count = parameter_count(covariate_dims, response_dims, cfg.rank, cfg.param_count, cfg.count_weight_terms);
  res.bic = bic(res.loglik, res.param_count, n_obs);
  if (!res.converged) {
    res.warnings.push_back("best restart stopped at the sweep budget before reaching outer_tol");
  }
  return res;
}

}  // namespace detail

FitResult fit(const PtotrProblem& problem, const FitConfig& cfg, const SweepObserver& observer) {
  problem.validate();
  cfg.validate();
  bool any_count = false;
  for (const auto& y : problem.responses) any_count = any_count || y.sum() > 0.0;
  if (!any_count) {
    throw NonexistenceError("all responses are zero: the covariate-factor MLE does not exist");
  }

  FitData data(problem);
  const detail::BlockFactory factory = make_factory(data);
  const detail::LoglikFn loglik = [&data](const CpTensor& b) { return data_loglik(data, b); };

  std::vector<detail::AlternatingOutcome> outcomes(cfg.restarts);
  const Rng master(cfg.seed);
  parallel_for(cfg.restarts, cfg.threads, [&](std::size_t k) {
    Rng rng = master.derive("ptotr-restart", k);
    CpTensor start = random_cp_start(data.cov_dims, data.resp_dims, cfg.rank, rng);
    std::function<void(std::size_t, const CpTensor&)> on_sweep;
    if (observer) on_sweep = [&observer, k](std::size_t s, const CpTensor& b) { observer(k, s, b); };
    outcomes[k] = detail::run_alternating(std::move(start), cfg, factory, loglik, on_sweep);
  });

  FitResult res = detail::assemble_result(std::move(outcomes), cfg, data.cov_dims, data.resp_dims,
                                          static_cast<double>(problem.num_observations()));
  res.dne_warnings = response_dne_rows(problem);
  for (std::size_t p = 0; p < res.dne_warnings.size(); ++p) {
    if (!res.dne_warnings[p].empty()) {
      res.warnings.push_back("response mode " + std::to_string(p + 1) + " has " +
                             std::to_string(res.dne_warnings[p].size()) +
                             " row(s) without counts; their MLE does not exist");
    }
  }
  bool exceeds_all = true;
  for (std::size_t n : data.cov_dims) exceeds_all = exceeds_all && cfg.rank > n;
  for (std::size_t m : data.resp_dims) exceeds_all = exceeds_all && cfg.rank > m;
  if (exceeds_all) res.warnings.push_back("rank exceeds every mode extent");
  return res;
}

}  // namespace ptotr
