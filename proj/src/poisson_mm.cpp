#include "ptotr/poisson_mm.hpp"

#include "ptotr/errors.hpp"

#include <cmath>
#include <limits>

namespace ptotr {

void MmProblem::validate() const {
  if (y.cols() != d.cols()) throw DimensionError("MmProblem: Y and D column counts differ");
  if (c_init.rows() != y.rows() || c_init.cols() != d.rows()) {
    throw DimensionError("MmProblem: C must be J x R for Y (J x L) and D (R x L)");
  }
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double v = y.data()[k];
    if (!(v >= 0.0) || v != std::floor(v)) throw InvalidArgument("MmProblem: counts must be nonnegative integers");
  }
  if ((d.array() < 0.0).any() || !d.allFinite()) throw InvalidArgument("MmProblem: design entries must be nonnegative");
  if ((d.rowwise().sum().array() <= 0.0).any()) throw InvalidArgument("MmProblem: a design row sums to zero");
  if ((d.colwise().sum().array() <= 0.0).any()) throw InvalidArgument("MmProblem: a design column sums to zero");
  if ((c_init.array() <= 0.0).any()) throw InvalidArgument("MmProblem: starting iterate must be strictly positive");
}

double poisson_objective(const Matrix& y, const Matrix& rates) {
  // Strictly positive rates take the vectorized path; 0 log r vanishes there.
  if (rates.size() > 0 && rates.minCoeff() > 0.0 && rates.allFinite()) {
    return (y.array() * rates.array().log()).sum() - rates.sum();
  }
  double f = 0.0;
  const double* yp = y.data();
  const double* rp = rates.data();
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double r = rp[k];
    if (r < 0.0 || std::isnan(r)) throw DegenerateRateError("negative or undefined Poisson rate");
    if (yp[k] > 0.0) {
      if (r <= 0.0) throw DegenerateRateError("zero Poisson rate at a positive count");
      f += yp[k] * std::log(r);
    }
    f -= r;
  }
  return f;
}

Matrix poisson_ratio(const Matrix& y, const Matrix& rates) {
  Matrix out(y.rows(), y.cols());
  const double* yp = y.data();
  const double* rp = rates.data();
  double* op = out.data();
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    if (yp[k] > 0.0) {
      if (!(rp[k] > 0.0)) throw DegenerateRateError("zero Poisson rate at a positive count");
      op[k] = yp[k] / rp[k];
    } else {
      op[k] = 0.0;
    }
  }
  return out;
}

namespace {

void check_rates_positive(const Matrix& rates) {
  if (!(rates.array() > 0.0).all()) throw DegenerateRateError("CD has a non-positive entry");
}

}  // namespace

double mm_objective(const Matrix& c, const MmProblem& p) {
  const Matrix rates = c * p.d;
  return poisson_objective(p.y, rates);
}

Matrix mm_step(const Matrix& c, const MmProblem& p) {
  const Matrix rates = c * p.d;
  check_rates_positive(rates);
  const Eigen::RowVectorXd denom = p.d.rowwise().sum().transpose();
  Matrix phi = poisson_ratio(p.y, rates) * p.d.transpose();
  phi.array().rowwise() /= denom.array();
  return c.cwiseProduct(phi);
}

MmResult run_mm(const MmEvaluator& evaluate, Matrix c0, const MmOptions& options) {
  MmResult res;
  res.c = std::move(c0);
  Matrix phi;
  double f = evaluate(res.c, &phi);
  res.objective_trajectory.push_back(f);
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    res.c.array() *= phi.array();
    for (Eigen::Index k = 0; k < res.c.size(); ++k) {
      double& v = res.c.data()[k];
      if (!(v >= options.floor)) {
        v = options.floor;
        ++res.floored_entries;
      }
    }
    const double prev = f;
    f = evaluate(res.c, &phi);
    res.objective_trajectory.push_back(f);
    res.iterations = it;
    if (options.observer) options.observer(it, res.c, f);
    if (options.tol > 0.0 &&
        std::abs(f - prev) < options.tol * std::max(std::abs(prev), std::numeric_limits<double>::min())) {
      res.converged = true;
      break;
    }
  }
  return res;
}

MmResult mm_solve(const MmProblem& p, double tol, std::size_t max_iter) {
  if (!(tol > 0.0)) throw InvalidArgument("mm_solve: tol must be positive");
  p.validate();
  const Eigen::RowVectorXd denom = p.d.rowwise().sum().transpose();
  auto evaluate = [&p, &denom](const Matrix& c, Matrix* phi) {
    const Matrix rates = c * p.d;
    check_rates_positive(rates);
    const double f = poisson_objective(p.y, rates);
    if (phi) {
      *phi = poisson_ratio(p.y, rates) * p.d.transpose();
      phi->array().rowwise() /= denom.array();
    }
    return f;
  };
  MmOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return run_mm(evaluate, p.c_init, opts);
}

std::vector<bool> check_mle_exists(const Matrix& y) {
  std::vector<bool> out(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index j = 0; j < y.rows(); ++j) out[static_cast<std::size_t>(j)] = y.row(j).sum() > 0.0;
  return out;
}

}  // namespace ptotr
