#pragma once

#include "ptotr/tensor.hpp"

#include <Eigen/SparseCore>

#include <vector>

namespace ptotr {

enum class RadonBinning { nearest, linear };

/// Pixel-driven parallel-beam projector.
///
/// Pixel (n1, n2) sits at x = n1 - (N1 + 1) / 2, y = n2 - (N2 + 1) / 2 and
/// projects onto s = x cos(theta) + y sin(theta). Angles are pi a / A for
/// a = 0..A-1. The radial bins tile [-D/2, D/2] with D the image diagonal.
/// Nearest binning deposits each pixel's unit mass in one bin per angle;
/// linear binning splits it between the two nearest bin centres. Either way
/// every angle receives the full pixel mass.
class RadonOperator {
 public:
  using Sparse = Eigen::SparseMatrix<double>;

  /// radial_bins = 0 selects 4 * max(n1, n2).
  RadonOperator(std::size_t n1, std::size_t n2, std::size_t num_angles, std::size_t radial_bins = 0,
                RadonBinning binning = RadonBinning::nearest);

  Dims image_dims() const { return {n1_, n2_}; }
  Dims sinogram_dims() const { return {angles_.size(), bins_}; }
  std::size_t num_angles() const noexcept { return angles_.size(); }
  std::size_t radial_bins() const noexcept { return bins_; }
  const std::vector<double>& angles() const noexcept { return angles_; }
  RadonBinning binning() const noexcept { return binning_; }

  /// (A * bins) x (N1 * N2); row a + A * b is sinogram cell (a + 1, b + 1).
  const Sparse& matrix() const noexcept { return matrix_; }

  DenseTensor forward(const DenseTensor& image) const;
  DenseTensor adjoint(const DenseTensor& sinogram) const;
  /// Sinogram of the indicator image E_n; n is 1-based.
  DenseTensor basis(const MultiIndex& n) const;
  /// The N1 x N2 matrix R_(i1,i2) with <R_(i1,i2), B> = forward(B)(i1, i2).
  DenseTensor cell_covariate(std::size_t angle, std::size_t bin) const;

 private:
  std::size_t n1_;
  std::size_t n2_;
  std::size_t bins_;
  RadonBinning binning_;
  std::vector<double> angles_;
  Sparse matrix_;
  Sparse matrix_t_;  // row-major access to cells
};

}  // namespace ptotr
