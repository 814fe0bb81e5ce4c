#include "ptotr/changepoint.hpp"

#include "ptotr/errors.hpp"
#include "ptotr/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace ptotr {

void GroupedCounts::validate() const {
  if (sums.empty() || sums.size() != counts.size()) throw InvalidArgument("grouped counts: need matching non-empty groups");
  for (std::size_t j = 0; j < sums.size(); ++j) {
    if (!(counts[j] > 0.0)) throw InvalidArgument("grouped counts: every group needs observations");
    if (sums[j].dims() != sums.front().dims()) throw DimensionError("grouped counts: extents differ");
  }
}

GroupedCounts group_series(const std::vector<DenseTensor>& series, std::size_t tau) {
  if (series.empty()) throw InvalidArgument("group_series: empty series");
  if (tau >= series.size()) throw InvalidArgument("group_series: need tau <= T - 1");
  GroupedCounts g;
  const std::size_t groups = tau == 0 ? 1 : 2;
  g.sums.assign(groups, DenseTensor(series.front().dims(), 0.0));
  g.counts.assign(groups, 0.0);
  for (std::size_t t = 1; t <= series.size(); ++t) {
    if (series[t - 1].dims() != series.front().dims()) throw DimensionError("group_series: extents differ");
    const std::size_t j = (tau == 0 || t <= tau) ? 0 : 1;
    g.sums[j].vec() += series[t - 1].vec();
    g.counts[j] += 1.0;
  }
  return g;
}

PtotrProblem ptanova_problem(const std::vector<DenseTensor>& series, std::size_t tau) {
  if (series.empty() || tau >= series.size()) throw InvalidArgument("ptanova_problem: need 0 <= tau <= T - 1");
  PtotrProblem p;
  for (std::size_t t = 1; t <= series.size(); ++t) {
    p.responses.push_back(series[t - 1]);
    if (tau == 0) {
      p.covariates.push_back(DenseTensor({1}, 1.0));
    } else {
      p.covariates.push_back(t <= tau ? DenseTensor({2}, std::vector<double>{1.0, 0.0})
                                      : DenseTensor({2}, std::vector<double>{0.0, 1.0}));
    }
  }
  return p;
}

namespace {

void check_model(const GroupedCounts& g, const CpTensor& b) {
  g.validate();
  b.validate();
  if (b.covariate_factors.size() != 1 || b.covariate_dims()[0] != g.groups()) {
    throw DimensionError("PTANOVA coefficient needs one covariate mode with one row per group");
  }
  if (b.response_dims() != g.sums.front().dims()) throw DimensionError("PTANOVA coefficient response extents differ");
}

// sum y log r - count * sum r over one group.
double group_objective(const Matrix& y, const Matrix& rates, double count) {
  return poisson_objective(y, rates) + (1.0 - count) * rates.sum();
}

// Response-mode block. Rates for group j: U~ G_jp.
struct GroupResponseBlock {
  const std::vector<Matrix>& y;  // Y_j(p)
  std::vector<Matrix> g;  // G_jp, R x M_{-p}
  std::vector<double> counts;
  Vector denom;  // sum_j counts_j G_jp 1

  GroupResponseBlock(const GroupedCounts& gc, const std::vector<Matrix>& y_p, const CpTensor& b, std::size_t p0)
      : y(y_p), counts(gc.counts) {
    const std::size_t r = b.rank();
    const Matrix rest_t = khatri_rao_decreasing(b.response_factors, r, p0).transpose();
    denom = Vector::Zero(static_cast<Eigen::Index>(r));
    for (std::size_t j = 0; j < gc.groups(); ++j) {
      g.push_back(b.covariate_factors[0].row(static_cast<Eigen::Index>(j)).transpose().asDiagonal() * rest_t);
      denom += counts[j] * g.back().rowwise().sum();
    }
  }

  double evaluate(const Matrix& u_tilde, Matrix* phi) const {
    double f = 0.0;
    if (phi) phi->setZero(u_tilde.rows(), u_tilde.cols());
    for (std::size_t j = 0; j < g.size(); ++j) {
      const Matrix rates = u_tilde * g[j];
      f += group_objective(y[j], rates, counts[j]);
      if (phi) phi->noalias() += poisson_ratio(y[j], rates) * g[j].transpose();
    }
    if (phi) {
      for (Eigen::Index r = 0; r < phi->cols(); ++r) {
        if (denom[r] > 0.0) {
          phi->col(r) /= denom[r];
        } else {
          phi->col(r).setOnes();
        }
      }
    }
    return f;
  }
};

// Covariate block. Rates for group j: U v~_j.
struct GroupCovariateBlock {
  const Matrix& y;  // prod M x J, column j = vec(Y_j)
  Matrix ku;
  Vector counts;
  Eigen::RowVectorXd ku_sums;

  GroupCovariateBlock(const Matrix& y_cols, const GroupedCounts& gc, const CpTensor& b)
      : y(y_cols), ku(khatri_rao_decreasing(b.response_factors, b.rank())),
        counts(Eigen::Map<const Vector>(gc.counts.data(), static_cast<Eigen::Index>(gc.counts.size()))),
        ku_sums(ku.colwise().sum()) {}

  double evaluate(const Matrix& v_tilde, Matrix* phi) const {
    const Matrix rates = ku * v_tilde.transpose();  // prod M x J
    double f = poisson_objective(y, rates);
    f -= ((counts.array() - 1.0) * rates.colwise().sum().transpose().array()).sum();
    if (phi) {
      *phi = poisson_ratio(y, rates).transpose() * ku;  // J x R
      for (Eigen::Index j = 0; j < phi->rows(); ++j) {
        for (Eigen::Index r = 0; r < phi->cols(); ++r) {
          const double den = counts[j] * ku_sums[r];
          (*phi)(j, r) = den > 0.0 ? (*phi)(j, r) / den : 1.0;
        }
      }
    }
    return f;
  }
};

struct GroupData {
  const GroupedCounts& g;
  std::vector<std::vector<Matrix>> y_by_mode;  // [p][j]
  Matrix y_cols;

  explicit GroupData(const GroupedCounts& gc) : g(gc) {
    gc.validate();
    const Dims& dims = gc.sums.front().dims();
    y_by_mode.resize(dims.size());
    for (std::size_t p = 0; p < dims.size(); ++p) {
      for (const auto& s : gc.sums) y_by_mode[p].push_back(matricize(s, p + 1));
    }
    y_cols.resize(static_cast<Eigen::Index>(gc.sums.front().size()), static_cast<Eigen::Index>(gc.groups()));
    for (std::size_t j = 0; j < gc.groups(); ++j) y_cols.col(static_cast<Eigen::Index>(j)) = gc.sums[j].vec();
  }

  double loglik(const CpTensor& b) const {
    const Matrix ku = khatri_rao_decreasing(b.response_factors, b.rank());
    const Matrix v_tilde = b.covariate_factors[0] * b.weights.asDiagonal();
    double f = 0.0;
    for (std::size_t j = 0; j < g.groups(); ++j) {
      const Matrix rates = ku * v_tilde.row(static_cast<Eigen::Index>(j)).transpose();
      f += group_objective(y_cols.col(static_cast<Eigen::Index>(j)), rates, g.counts[j]);
    }
    return f;
  }
};

FitResult fit_grouped(const GroupData& data, const FitConfig& cfg, std::size_t threads) {
  const GroupedCounts& g = data.g;
  bool any_count = false;
  for (const auto& s : g.sums) any_count = any_count || s.sum() > 0.0;
  if (!any_count) throw NonexistenceError("all responses are zero: the covariate-factor MLE does not exist");

  const detail::BlockFactory factory = [&data](const CpTensor& b, bool response, std::size_t mode0) -> MmEvaluator {
    if (response) {
      auto blk = std::make_shared<const GroupResponseBlock>(data.g, data.y_by_mode[mode0], b, mode0);
      return [blk](const Matrix& c, Matrix* phi) { return blk->evaluate(c, phi); };
    }
    auto blk = std::make_shared<const GroupCovariateBlock>(data.y_cols, data.g, b);
    return [blk](const Matrix& c, Matrix* phi) { return blk->evaluate(c, phi); };
  };
  const detail::LoglikFn loglik = [&data](const CpTensor& b) { return data.loglik(b); };

  const Dims cov{g.groups()};
  const Dims resp = g.sums.front().dims();
  std::vector<detail::AlternatingOutcome> outcomes(cfg.restarts);
  const Rng master(cfg.seed);
  parallel_for(cfg.restarts, threads, [&](std::size_t k) {
    Rng rng = master.derive("ptotr-restart", k);
    outcomes[k] = detail::run_alternating(random_cp_start(cov, resp, cfg.rank, rng), cfg, factory, loglik);
  });
  double n_obs = 0.0;
  for (double c : g.counts) n_obs += c;
  FitResult res = detail::assemble_result(std::move(outcomes), cfg, cov, resp, n_obs * static_cast<double>(num_elements(resp)));
  for (std::size_t p = 0; p < resp.size(); ++p) {
    Vector totals = Vector::Zero(static_cast<Eigen::Index>(resp[p]));
    for (const Matrix& y : data.y_by_mode[p]) totals += y.rowwise().sum();
    std::vector<std::size_t> rows;
    for (Eigen::Index m = 0; m < totals.size(); ++m) {
      if (totals[m] <= 0.0) rows.push_back(static_cast<std::size_t>(m) + 1);
    }
    if (!rows.empty()) {
      res.warnings.push_back("response mode " + std::to_string(p + 1) + " has rows without counts");
    }
    res.dne_warnings.push_back(std::move(rows));
  }
  return res;
}

}  // namespace

double grouped_loglik(const GroupedCounts& g, const CpTensor& b) {
  check_model(g, b);
  return GroupData(g).loglik(b);
}

Matrix ptanova_v_step(const GroupedCounts& g, const CpTensor& b, const Matrix& v_tilde) {
  check_model(g, b);
  if (v_tilde.rows() != static_cast<Eigen::Index>(g.groups()) || v_tilde.cols() != static_cast<Eigen::Index>(b.rank())) {
    throw DimensionError("ptanova_v_step: V~ has the wrong shape");
  }
  GroupData data(g);
  GroupCovariateBlock blk(data.y_cols, g, b);
  Matrix phi;
  blk.evaluate(v_tilde, &phi);
  return v_tilde.cwiseProduct(phi);
}

Matrix ptanova_u_step(const GroupedCounts& g, const CpTensor& b, std::size_t p, const Matrix& u_tilde) {
  check_model(g, b);
  const std::size_t order = b.response_factors.size();
  if (p < 1 || p > order) throw DimensionError("ptanova_u_step: response mode out of range");
  if (u_tilde.rows() != b.response_factors[p - 1].rows() || u_tilde.cols() != static_cast<Eigen::Index>(b.rank())) {
    throw DimensionError("ptanova_u_step: U~ has the wrong shape");
  }
  GroupData data(g);
  GroupResponseBlock blk(g, data.y_by_mode[p - 1], b, p - 1);
  Matrix phi;
  blk.evaluate(u_tilde, &phi);
  return u_tilde.cwiseProduct(phi);
}

FitResult fit_ptanova(const GroupedCounts& g, const FitConfig& cfg) {
  cfg.validate();
  const GroupData data(g);
  return fit_grouped(data, cfg, cfg.threads);
}

ChangePointResult changepoint_scan(const std::vector<DenseTensor>& series, const FitConfig& cfg,
                                   std::vector<std::size_t> tau_candidates) {
  cfg.validate();
  const std::size_t t_len = series.size();
  if (t_len < 2) throw InvalidArgument("changepoint_scan: need T >= 2");
  if (tau_candidates.empty()) {
    for (std::size_t tau = 1; tau < t_len; ++tau) tau_candidates.push_back(tau);
  }
  for (std::size_t tau : tau_candidates) {
    if (tau < 1 || tau >= t_len) throw InvalidArgument("changepoint_scan: candidate tau outside 1..T-1");
  }
  std::sort(tau_candidates.begin(), tau_candidates.end());
  tau_candidates.erase(std::unique(tau_candidates.begin(), tau_candidates.end()), tau_candidates.end());

  ChangePointResult res;
  res.taus = tau_candidates;
  res.fits.resize(tau_candidates.size() + 1);
  // Slot 0 is the null model.
  parallel_for(tau_candidates.size() + 1, cfg.threads, [&](std::size_t k) {
    const GroupedCounts g = group_series(series, k == 0 ? 0 : tau_candidates[k - 1]);
    const GroupData data(g);
    res.fits[k] = fit_grouped(data, cfg, 1);
  });
  res.null_fit = std::move(res.fits.front());
  res.fits.erase(res.fits.begin());
  res.null_loglik = res.null_fit.loglik;

  std::size_t best = 0;
  for (std::size_t k = 0; k < res.fits.size(); ++k) {
    const double ll = res.fits[k].loglik;
    res.loglik_by_tau.push_back(ll);
    res.lambda_by_tau.push_back(2.0 * (ll - res.null_loglik));
    if (ll > res.loglik_by_tau[best]) best = k;
  }
  res.tau_hat = res.taus[best];
  res.tie = std::count(res.loglik_by_tau.begin(), res.loglik_by_tau.end(), res.loglik_by_tau[best]) > 1;
  return res;
}

}  // namespace ptotr
