#pragma once

#include "ptotr/tensor.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace ptotr {

/// Covariate layout for autoregressive count models.
///
/// With `trend_degree` set the builder produces the trend-augmented layout:
/// every mode grows by F + 1, Y_{t-1} fills the leading corner and t^f sits on
/// the diagonal corner (M_q + 1 + f, ..., M_q + 1 + f). Lags other than 1 are
/// not used in that layout.
///
/// Otherwise X_t gains one trailing mode of slabs: the all-ones slab (when
/// `include_intercept_slab`), then one slab per lag block holding the mean of
/// Y_{t-f} over the block.
struct ArSpec {
  std::optional<std::size_t> trend_degree;
  std::vector<std::vector<std::size_t>> lag_blocks;
  bool include_intercept_slab = true;

  void validate() const;
  std::size_t max_lag() const;
  std::size_t num_slabs() const;
  /// Covariate extents for responses of extents `response_dims`.
  Dims covariate_dims(const Dims& response_dims) const;
};

/// X_t built from history[0 .. t-2] (history[k] is Y_{k+1}); t is 1-based and
/// must exceed spec.max_lag().
DenseTensor ar_covariate(const std::vector<DenseTensor>& history, std::size_t t, const ArSpec& spec);

/// (X_t, Y_t) for t = max_lag + 1 .. T.
std::vector<std::pair<DenseTensor, DenseTensor>> build_ar_covariates(const std::vector<DenseTensor>& history,
                                                                     const ArSpec& spec);

}  // namespace ptotr
