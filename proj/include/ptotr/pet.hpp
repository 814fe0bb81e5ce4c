#pragma once

#include "ptotr/estimator.hpp"
#include "ptotr/radon.hpp"
#include "ptotr/rng.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace ptotr {

/// Subsampled tomographic measurements of an image B of extents
/// (N1, N2, M_1, ...): cell (a, b) carries the count tensor Y_(a,b) of extents
/// (M_1, ...), or {1} for a 2-D image.
struct PetProblem {
  std::shared_ptr<const RadonOperator> op;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // 1-based (angle, bin), increasing storage order
  std::vector<DenseTensor> responses;
  Dims response_dims;
  std::optional<DenseTensor> truth;

  Dims image_dims() const;
  void validate() const;
};

/// Draws floor(fraction * A * bins) distinct sinogram cells uniformly and
/// samples Y_(a,b) ~ Poisson(<R_(a,b)|truth>).
PetProblem pet_simulate(const DenseTensor& truth, std::shared_ptr<const RadonOperator> op, double fraction, Rng& rng);

/// PToTR view of the measurements. Cells whose covariate R_(a,b) is identically
/// zero carry no information and are dropped.
PtotrProblem pet_to_ptotr(const PetProblem& problem);

struct PetPtotrResult {
  FitResult fit;
  DenseTensor estimate;
  std::vector<double> rmse_trajectory;  // entry s - 1 is after sweep s of the best restart; empty without truth
};

PetPtotrResult pet_reconstruct_ptotr(const PetProblem& problem, const FitConfig& cfg);

struct MlemResult {
  DenseTensor estimate;
  std::vector<double> rmse_trajectory;       // entry k is after k iterations (0 = start); empty without truth
  std::vector<double> objective_trajectory;  // same indexing
  std::vector<std::size_t> unobserved_pixels;  // 0-based pixels no retained ray touches
  std::vector<std::size_t> dne_rows;           // 1-based response entries whose counts are all zero
};

/// Classic ML-EM: the unconstrained multiplicative update on
/// Y = [vec Y_(a,b)] ~ Poisson(C [vec R_(a,b)]) for exactly `max_iter`
/// iterations from the constant C = sum Y / (J sum D). Cells whose ray misses
/// the image are dropped, and pixels that no retained ray touches keep their
/// initial value.
MlemResult pet_reconstruct_mlem(const PetProblem& problem, std::size_t max_iter);

/// The dense MM problem that ML-EM iterates on, with the same start.
/// Cells whose ray misses the image are dropped; every pixel must be seen.
MmProblem pet_mlem_problem(const PetProblem& problem);

/// B(n1, n2, m) = scale * image(n1, n2) * (0.5 + k / J) where k is the 0-based
/// linear index of the response entry m and J the number of response entries.
DenseTensor make_pet_truth(const DenseTensor& image, const Dims& response_dims, double scale);

/// sqrt(||est - truth||_F^2 / d).
double rmse(const DenseTensor& est, const DenseTensor& truth);

}  // namespace ptotr
