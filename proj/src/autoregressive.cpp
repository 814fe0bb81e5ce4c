#include "ptotr/autoregressive.hpp"

#include "ptotr/errors.hpp"

#include <algorithm>
#include <cmath>

namespace ptotr {

void ArSpec::validate() const {
  if (trend_degree) {
    for (const auto& block : lag_blocks) {
      if (block != std::vector<std::size_t>{1}) {
        throw InvalidArgument("trend layout only supports the single lag block {1}");
      }
    }
    return;
  }
  if (lag_blocks.empty() && !include_intercept_slab) throw InvalidArgument("ArSpec has no slabs");
  for (const auto& block : lag_blocks) {
    if (block.empty()) throw InvalidArgument("ArSpec lag block is empty");
    for (std::size_t f : block) {
      if (f == 0) throw InvalidArgument("ArSpec lags must be positive");
    }
  }
}

std::size_t ArSpec::max_lag() const {
  if (trend_degree) return 1;
  std::size_t lag = 0;
  for (const auto& block : lag_blocks) {
    for (std::size_t f : block) lag = std::max(lag, f);
  }
  return lag;
}

std::size_t ArSpec::num_slabs() const {
  return lag_blocks.size() + (include_intercept_slab ? 1 : 0);
}

Dims ArSpec::covariate_dims(const Dims& response_dims) const {
  validate();
  Dims out = response_dims;
  if (trend_degree) {
    for (auto& m : out) m += *trend_degree + 1;
  } else {
    out.push_back(num_slabs());
  }
  return out;
}

DenseTensor ar_covariate(const std::vector<DenseTensor>& history, std::size_t t, const ArSpec& spec) {
  spec.validate();
  const std::size_t lag = spec.max_lag();
  if (t <= lag || t - 1 > history.size()) {
    throw InvalidArgument("ar_covariate: history too short for the requested lags");
  }
  const DenseTensor& prev = history[t - 2];
  const Dims& md = prev.dims();
  DenseTensor x(spec.covariate_dims(md), 0.0);

  if (spec.trend_degree) {
    MultiIndex idx(md.size());
    // Leading corner: Y_{t-1}.
    MultiIndex src(md.size(), 1);
    for (std::size_t k = 0; k < prev.size(); ++k) {
      x.at(src) = prev[k];
      for (std::size_t q = 0; q < src.size(); ++q) {
        if (++src[q] <= md[q]) break;
        src[q] = 1;
      }
    }
    const auto tt = static_cast<double>(t);
    for (std::size_t f = 0; f <= *spec.trend_degree; ++f) {
      for (std::size_t q = 0; q < md.size(); ++q) idx[q] = md[q] + 1 + f;
      x.at(idx) = std::pow(tt, static_cast<double>(f));
    }
    return x;
  }

  const std::size_t slab = prev.size();
  auto out = x.values();
  std::size_t s = 0;
  if (spec.include_intercept_slab) {
    std::fill_n(out.begin(), slab, 1.0);
    ++s;
  }
  for (const auto& block : spec.lag_blocks) {
    const double scale = 1.0 / static_cast<double>(block.size());
    for (std::size_t f : block) {
      const auto src = history[t - 1 - f].values();
      for (std::size_t k = 0; k < slab; ++k) out[s * slab + k] += scale * src[k];
    }
    ++s;
  }
  return x;
}

std::vector<std::pair<DenseTensor, DenseTensor>> build_ar_covariates(const std::vector<DenseTensor>& history,
                                                                     const ArSpec& spec) {
  spec.validate();
  const std::size_t lag = spec.max_lag();
  if (history.size() <= lag) throw InvalidArgument("build_ar_covariates: history too short for the requested lags");
  for (const auto& y : history) {
    if (y.dims() != history.front().dims()) throw DimensionError("build_ar_covariates: history extents differ");
  }
  std::vector<std::pair<DenseTensor, DenseTensor>> pairs;
  pairs.reserve(history.size() - lag);
  for (std::size_t t = lag + 1; t <= history.size(); ++t) {
    pairs.emplace_back(ar_covariate(history, t, spec), history[t - 1]);
  }
  return pairs;
}

}  // namespace ptotr
