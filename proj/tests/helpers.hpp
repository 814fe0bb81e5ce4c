#pragma once

#include "ptotr/estimator.hpp"
#include "ptotr/rng.hpp"
#include "ptotr/synth.hpp"
#include "ptotr/tensor.hpp"

#include <cmath>
#include <cstdint>

namespace ptotr::testing {

inline DenseTensor random_tensor(const Dims& dims, Rng& rng, double lo = 0.0, double hi = 1.0) {
  DenseTensor t(dims);
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.uniform(lo, hi);
  return t;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double lo = 0.1, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
  return m;
}

inline Dims random_dims(std::size_t order, std::size_t max_extent, Rng& rng) {
  Dims d(order);
  for (auto& e : d) e = 1 + rng.below(max_extent);
  return d;
}

inline CpTensor random_cp(const Dims& cov, const Dims& resp, std::size_t rank, Rng& rng) {
  CpTensor c;
  c.weights = Vector(static_cast<Eigen::Index>(rank));
  for (Eigen::Index r = 0; r < c.weights.size(); ++r) c.weights[r] = rng.uniform(0.5, 3.0);
  const auto rr = static_cast<Eigen::Index>(rank);
  for (std::size_t n : cov) c.covariate_factors.push_back(random_matrix(static_cast<Eigen::Index>(n), rr, rng));
  for (std::size_t m : resp) c.response_factors.push_back(random_matrix(static_cast<Eigen::Index>(m), rr, rng));
  return c;
}

/// Small random problem: I <= 20, up to two covariate and two response modes
/// of extent <= 4, rank <= 3.
inline SyntheticDataset random_small_problem(Rng& rng, std::size_t max_extent = 4) {
  const Dims cov = random_dims(1 + rng.below(2), max_extent, rng);
  const Dims resp = random_dims(1 + rng.below(2), max_extent, rng);
  const std::size_t rank = 1 + rng.below(3);
  const std::size_t n_obs = 2 + rng.below(19);
  return make_ptotr_dataset(cov, resp, rank, n_obs, 4.0, rng);
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double rel_err(const DenseTensor& a, const DenseTensor& b) {
  return rel_err(Matrix(a.vec()), Matrix(b.vec()));
}

}  // namespace ptotr::testing
