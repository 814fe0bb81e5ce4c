#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace ptotr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Dims = std::vector<std::size_t>;

/// 1-based multi-index (m_1, ..., m_P) into a tensor.
using MultiIndex = std::vector<std::size_t>;

std::size_t num_elements(const Dims& dims);

/// Dense real tensor stored column-major: the mode-1 index varies fastest, so
/// the flat value array is exactly vec(t).
class DenseTensor {
 public:
  /// A 1-element tensor holding 0.
  DenseTensor();
  explicit DenseTensor(Dims dims, double fill = 0.0);
  DenseTensor(Dims dims, std::vector<double> values);

  static DenseTensor scalar(double value);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t order() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t flat) const { return values_[flat]; }
  double& operator[](std::size_t flat) { return values_[flat]; }

  /// Flat offset of a 1-based multi-index. Throws DimensionError when out of range.
  std::size_t offset(const MultiIndex& index) const;
  double at(const MultiIndex& index) const { return values_[offset(index)]; }
  double& at(const MultiIndex& index) { return values_[offset(index)]; }

  Eigen::Map<const Vector> vec() const {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }
  Eigen::Map<Vector> vec() {
    return {values_.data(), static_cast<Eigen::Index>(values_.size())};
  }

  double sum() const;
  bool operator==(const DenseTensor& other) const = default;

 private:
  Dims dims_;
  std::vector<double> values_;
};

/// Rank-R CP representation [[lambda; V^(1..Q), U^(1..P)]]. Covariate factors
/// occupy the leading modes of the represented tensor, response factors the
/// trailing ones.
struct CpTensor {
  Vector weights;
  std::vector<Matrix> covariate_factors;  // V^(q), N_q x R
  std::vector<Matrix> response_factors;   // U^(p), M_p x R

  std::size_t rank() const { return static_cast<std::size_t>(weights.size()); }
  Dims covariate_dims() const;
  Dims response_dims() const;
  /// (N_1..N_Q, M_1..M_P)
  Dims dims() const;

  /// Shape consistency and strict positivity of every entry.
  void validate() const;
  /// Unit column sums in every factor and non-increasing weights.
  bool is_normalized(double tol = 1e-10) const;
};

/// Mode-n unfolding (Kolda-Bader); `mode` is 1-based.
Matrix matricize(const DenseTensor& t, std::size_t mode);
DenseTensor dematricize(const Matrix& m, const Dims& dims, std::size_t mode);

/// Column-wise Kronecker product; the LAST matrix's row index varies fastest.
Matrix khatri_rao(std::span<const Matrix> matrices);

/// Khatri-Rao product of `factors` taken in decreasing mode order, optionally
/// omitting the 0-based index `skip`. An empty product is a 1 x rank row of ones.
Matrix khatri_rao_decreasing(std::span<const Matrix> factors, std::size_t rank,
                             std::size_t skip = static_cast<std::size_t>(-1));

DenseTensor cp_reconstruct(const CpTensor& c);

/// <x|b>: sums x against the leading modes of b.
DenseTensor partial_contract(const DenseTensor& x, const DenseTensor& b);
/// Factored <x|b> that never materializes b.
DenseTensor partial_contract(const DenseTensor& x, const CpTensor& b);

/// Rescales factor columns to unit sums, folds the scales into the weights and
/// sorts components by decreasing weight (stable).
CpTensor normalize_cp(CpTensor c);

}  // namespace ptotr
