#pragma once

#include "ptotr/autoregressive.hpp"
#include "ptotr/estimator.hpp"
#include "ptotr/rng.hpp"
#include "ptotr/tensor.hpp"

#include <vector>

namespace ptotr {

/// Independent Poisson counts with the given (strictly positive) rates, drawn
/// in storage order.
DenseTensor sample_poisson_tensor(const DenseTensor& rates, Rng& rng);

/// T count tensors of extents (m1, m2, m3) with rate 1, except that the
/// mode-3 slab `topic_index` (1-based) has rate `a` for t > tau. tau = 0
/// means no change: every entry has rate 1.
std::vector<DenseTensor> make_changepoint_series(std::size_t m1, std::size_t m2, std::size_t m3, std::size_t t_len,
                                                 std::size_t tau, double a, std::size_t topic_index, Rng& rng);

enum class PhantomKind { shepp_logan_like, blocks, uniform };

/// Strictly positive n1 x n2 image, every entry >= floor.
///
/// shepp_logan_like: the ten ellipses of the modified Shepp-Logan head
/// (Toft's intensities) on [-1, 1]^2, with mode 1 along the vertical axis,
/// clamped at 0 and offset by floor. blocks: two rectangles of heights 1
/// and 2 on a zero background, plus floor. uniform: floor + 1.
DenseTensor make_phantom(std::size_t n1, std::size_t n2, PhantomKind kind, double floor);

/// Simulates Y_t ~ Poisson(<X_t|B>) with X_t from `spec`, starting from
/// spec.max_lag() all-zero tensors. The first `burn_in` draws are discarded and
/// the following `t_len` returned. Throws InvalidArgument once a rate exceeds
/// `rate_cap`.
std::vector<DenseTensor> make_ar_series(const CpTensor& b_true, const ArSpec& spec, std::size_t t_len,
                                        std::size_t burn_in, Rng& rng, double rate_cap = 1e6);

struct SyntheticDataset {
  PtotrProblem problem;
  CpTensor truth;  // normalized
};

/// Random PToTR instance: covariates uniform on (0, 1), factor entries uniform
/// on (0.1, 1) and weights scaled so the mean rate is `mean_rate`.
SyntheticDataset make_ptotr_dataset(const Dims& covariate_dims, const Dims& response_dims, std::size_t rank,
                                    std::size_t n_obs, double mean_rate, Rng& rng);

}  // namespace ptotr
