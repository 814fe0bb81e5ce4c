#include "ptotr/radon.hpp"

#include "ptotr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ptotr {

RadonOperator::RadonOperator(std::size_t n1, std::size_t n2, std::size_t num_angles, std::size_t radial_bins,
                             RadonBinning binning)
    : n1_(n1), n2_(n2), bins_(radial_bins == 0 ? 4 * std::max(n1, n2) : radial_bins), binning_(binning) {
  if (n1 == 0 || n2 == 0) throw InvalidArgument("RadonOperator: empty image");
  if (num_angles == 0) throw InvalidArgument("RadonOperator: need at least one angle");
  const std::size_t n_angles = num_angles;
  for (std::size_t a = 0; a < n_angles; ++a) {
    angles_.push_back(std::numbers::pi * static_cast<double>(a) / static_cast<double>(n_angles));
  }
  const double diag = std::hypot(static_cast<double>(n1), static_cast<double>(n2));
  const double width = diag / static_cast<double>(bins_);
  const double c1 = (static_cast<double>(n1) + 1.0) / 2.0;
  const double c2 = (static_cast<double>(n2) + 1.0) / 2.0;
  const auto last = static_cast<long>(bins_) - 1;

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(n1 * n2 * n_angles * (binning == RadonBinning::linear ? 2 : 1));
  for (std::size_t a = 0; a < n_angles; ++a) {
    const double ct = std::cos(angles_[a]);
    const double st = std::sin(angles_[a]);
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t i = 0; i < n1; ++i) {
        const double s = (static_cast<double>(i + 1) - c1) * ct + (static_cast<double>(j + 1) - c2) * st;
        const double u = (s + diag / 2.0) / width - 0.5;  // bin centres at integers
        const auto pixel = static_cast<int>(i + n1 * j);
        auto row = [&](long b) { return static_cast<int>(a + n_angles * static_cast<std::size_t>(b)); };
        if (binning == RadonBinning::nearest) {
          const long b = std::clamp(std::lround(u), 0L, last);
          entries.emplace_back(row(b), pixel, 1.0);
        } else {
          const double fl = std::floor(u);
          const long b0 = static_cast<long>(fl);
          const double frac = u - fl;
          if (b0 < 0) {
            entries.emplace_back(row(0), pixel, 1.0);
          } else if (b0 >= last) {
            entries.emplace_back(row(last), pixel, 1.0);
          } else {
            entries.emplace_back(row(b0), pixel, 1.0 - frac);
            entries.emplace_back(row(b0 + 1), pixel, frac);
          }
        }
      }
    }
  }
  matrix_.resize(static_cast<Eigen::Index>(n_angles * bins_), static_cast<Eigen::Index>(n1 * n2));
  matrix_.setFromTriplets(entries.begin(), entries.end());
  matrix_.prune(0.0);
  matrix_t_ = matrix_.transpose();
}

DenseTensor RadonOperator::forward(const DenseTensor& image) const {
  if (image.dims() != image_dims()) throw DimensionError("radon forward: image extents differ from the operator");
  DenseTensor out(sinogram_dims(), 0.0);
  out.vec() = matrix_ * image.vec();
  return out;
}

DenseTensor RadonOperator::adjoint(const DenseTensor& sinogram) const {
  if (sinogram.dims() != sinogram_dims()) throw DimensionError("radon adjoint: sinogram extents differ");
  DenseTensor out(image_dims(), 0.0);
  out.vec() = matrix_t_ * sinogram.vec();
  return out;
}

DenseTensor RadonOperator::basis(const MultiIndex& n) const {
  if (n.size() != 2 || n[0] < 1 || n[0] > n1_ || n[1] < 1 || n[1] > n2_) {
    throw DimensionError("radon basis: pixel index out of range");
  }
  DenseTensor out(sinogram_dims(), 0.0);
  out.vec() = matrix_.col(static_cast<Eigen::Index>((n[0] - 1) + n1_ * (n[1] - 1)));
  return out;
}

DenseTensor RadonOperator::cell_covariate(std::size_t angle, std::size_t bin) const {
  if (angle < 1 || angle > angles_.size() || bin < 1 || bin > bins_) {
    throw DimensionError("radon cell: sinogram index out of range");
  }
  DenseTensor out(image_dims(), 0.0);
  out.vec() = matrix_t_.col(static_cast<Eigen::Index>((angle - 1) + angles_.size() * (bin - 1)));
  return out;
}

}  // namespace ptotr
