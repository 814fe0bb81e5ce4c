#include "ptotr/synth.hpp"

#include "ptotr/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace ptotr {

DenseTensor sample_poisson_tensor(const DenseTensor& rates, Rng& rng) {
  DenseTensor out(rates.dims(), 0.0);
  for (std::size_t k = 0; k < rates.size(); ++k) {
    if (!(rates[k] > 0.0)) throw InvalidArgument("sample_poisson_tensor: rates must be strictly positive");
    out[k] = static_cast<double>(sample_poisson(rates[k], rng));
  }
  return out;
}

std::vector<DenseTensor> make_changepoint_series(std::size_t m1, std::size_t m2, std::size_t m3, std::size_t t_len,
                                                 std::size_t tau, double a, std::size_t topic_index, Rng& rng) {
  if (m1 == 0 || m2 == 0 || m3 == 0 || t_len == 0) throw InvalidArgument("make_changepoint_series: empty extents");
  if (tau >= t_len) throw InvalidArgument("make_changepoint_series: need 0 <= tau <= T - 1");
  if (!(a > 0.0)) throw InvalidArgument("make_changepoint_series: a must be positive");
  if (topic_index < 1 || topic_index > m3) throw InvalidArgument("make_changepoint_series: topic index out of range");
  const Dims dims{m1, m2, m3};
  DenseTensor before(dims, 1.0);
  DenseTensor after = before;
  const std::size_t slab = m1 * m2;
  std::fill_n(after.values().begin() + static_cast<std::ptrdiff_t>((topic_index - 1) * slab), slab, a);
  std::vector<DenseTensor> series;
  series.reserve(t_len);
  for (std::size_t t = 1; t <= t_len; ++t) series.push_back(sample_poisson_tensor(tau > 0 && t > tau ? after : before, rng));
  return series;
}

namespace {

struct Ellipse {
  double x0, y0, a, b, phi_deg, value;
};

constexpr std::array<Ellipse, 10> kModifiedSheppLogan{{
    {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
    {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},
    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
    {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
    {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
    {0.0, -0.606, 0.023, 0.023, 0.0, 0.1},
    {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
}};

}  // namespace

DenseTensor make_phantom(std::size_t n1, std::size_t n2, PhantomKind kind, double floor) {
  if (n1 == 0 || n2 == 0) throw InvalidArgument("make_phantom: empty image");
  if (!(floor > 0.0)) throw InvalidArgument("make_phantom: floor must be positive");
  DenseTensor img({n1, n2}, floor);
  switch (kind) {
    case PhantomKind::uniform:
      for (double& v : img.values()) v = floor + 1.0;
      break;
    case PhantomKind::blocks:
      for (std::size_t j = 0; j < n2; ++j) {
        for (std::size_t i = 0; i < n1; ++i) {
          double v = 0.0;
          if (i >= n1 / 4 && i < n1 / 2 && j >= n2 / 4 && j < (3 * n2) / 4) v = 1.0;
          if (i >= (5 * n1) / 8 && i < (7 * n1) / 8 && j >= n2 / 2 && j < (7 * n2) / 8) v = 2.0;
          img[i + n1 * j] = floor + v;
        }
      }
      break;
    case PhantomKind::shepp_logan_like:
      for (std::size_t j = 0; j < n2; ++j) {
        const double x = (2.0 * static_cast<double>(j) + 1.0) / static_cast<double>(n2) - 1.0;
        for (std::size_t i = 0; i < n1; ++i) {
          const double y = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n1);
          double v = 0.0;
          for (const Ellipse& e : kModifiedSheppLogan) {
            const double phi = e.phi_deg * std::numbers::pi / 180.0;
            const double dx = x - e.x0;
            const double dy = y - e.y0;
            const double u = dx * std::cos(phi) + dy * std::sin(phi);
            const double w = -dx * std::sin(phi) + dy * std::cos(phi);
            if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.value;
          }
          img[i + n1 * j] = floor + std::max(v, 0.0);
        }
      }
      break;
  }
  return img;
}

std::vector<DenseTensor> make_ar_series(const CpTensor& b_true, const ArSpec& spec, std::size_t t_len,
                                        std::size_t burn_in, Rng& rng, double rate_cap) {
  spec.validate();
  b_true.validate();
  const Dims resp = b_true.response_dims();
  if (b_true.covariate_dims() != spec.covariate_dims(resp)) {
    throw DimensionError("make_ar_series: coefficient extents do not match the covariate layout");
  }
  const std::size_t lag = spec.max_lag();
  std::vector<DenseTensor> history(lag, DenseTensor(resp, 0.0));
  history.reserve(lag + burn_in + t_len);
  for (std::size_t k = 0; k < burn_in + t_len; ++k) {
    const std::size_t t = history.size() + 1;
    const DenseTensor rates = partial_contract(ar_covariate(history, t, spec), b_true);
    DenseTensor y(resp, 0.0);
    for (std::size_t m = 0; m < rates.size(); ++m) {
      if (rates[m] > rate_cap) throw InvalidArgument("make_ar_series: rate exceeded the cap; the process is explosive");
      y[m] = static_cast<double>(sample_poisson(rates[m], rng));
    }
    history.push_back(std::move(y));
  }
  return {history.begin() + static_cast<std::ptrdiff_t>(lag + burn_in), history.end()};
}

SyntheticDataset make_ptotr_dataset(const Dims& covariate_dims, const Dims& response_dims, std::size_t rank,
                                    std::size_t n_obs, double mean_rate, Rng& rng) {
  if (n_obs == 0 || rank == 0) throw InvalidArgument("make_ptotr_dataset: need n_obs >= 1 and rank >= 1");
  if (!(mean_rate > 0.0)) throw InvalidArgument("make_ptotr_dataset: mean_rate must be positive");
  SyntheticDataset ds;
  ds.truth = random_cp_start(covariate_dims, response_dims, rank, rng);
  std::vector<DenseTensor> rates;
  double total = 0.0;
  for (std::size_t i = 0; i < n_obs; ++i) {
    DenseTensor x(covariate_dims, 0.0);
    for (double& v : x.values()) v = rng.uniform(0.0, 1.0);
    rates.push_back(partial_contract(x, ds.truth));
    total += rates.back().sum();
    ds.problem.covariates.push_back(std::move(x));
  }
  const double scale = mean_rate * static_cast<double>(n_obs * num_elements(response_dims)) / total;
  ds.truth.weights *= scale;
  for (auto& r : rates) {
    for (double& v : r.values()) v *= scale;
    ds.problem.responses.push_back(sample_poisson_tensor(r, rng));
  }
  return ds;
}

}  // namespace ptotr
