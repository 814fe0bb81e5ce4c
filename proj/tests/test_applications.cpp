#include "helpers.hpp"
#include "ptotr/autoregressive.hpp"
#include "ptotr/changepoint.hpp"
#include "ptotr/errors.hpp"
#include "ptotr/pet.hpp"
#include "ptotr/radon.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>

using namespace ptotr;
using namespace ptotr::testing;

// ---- autoregressive covariates ----

TEST(Autoregressive, LaggedBlockLayout) {
  Rng rng(41);
  std::vector<DenseTensor> history;
  for (int t = 0; t < 9; ++t) history.push_back(sample_poisson_tensor(DenseTensor({25, 25, 4}, 0.3), rng));
  ArSpec spec;
  spec.lag_blocks = {{1}, {2, 3, 4, 5}};
  EXPECT_EQ(spec.covariate_dims({25, 25, 4}), (Dims{25, 25, 4, 3}));
  const auto pairs = build_ar_covariates(history, spec);
  ASSERT_EQ(pairs.size(), 4u);  // t = 6..9
  EXPECT_EQ(pairs.front().first.dims(), (Dims{25, 25, 4, 3}));
  EXPECT_EQ(pairs.front().second, history[5]);
  const DenseTensor& x = pairs.front().first;
  EXPECT_EQ(x.at({3, 7, 2, 1}), 1.0);
  EXPECT_EQ(x.at({3, 7, 2, 2}), history[4].at({3, 7, 2}));
  double avg = 0.0;
  for (int f = 2; f <= 5; ++f) avg += history[static_cast<std::size_t>(5 - f)].at({3, 7, 2});
  EXPECT_DOUBLE_EQ(x.at({3, 7, 2, 3}), avg / 4.0);
}

TEST(Autoregressive, TrendLayout) {
  std::vector<DenseTensor> history{DenseTensor({2, 2, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8})};
  ArSpec spec;
  spec.trend_degree = 0;
  const DenseTensor x = ar_covariate(history, 2, spec);
  EXPECT_EQ(x.dims(), (Dims{3, 3, 3}));
  EXPECT_EQ(x.at({3, 3, 3}), 1.0);
  for (std::size_t a = 1; a <= 2; ++a)
    for (std::size_t b = 1; b <= 2; ++b)
      for (std::size_t c = 1; c <= 2; ++c) EXPECT_EQ(x.at({a, b, c}), history[0].at({a, b, c}));
  EXPECT_EQ(x.sum(), history[0].sum() + 1.0);

  spec.trend_degree = 2;
  const DenseTensor x2 = ar_covariate(history, 2, spec);
  EXPECT_EQ(x2.dims(), (Dims{5, 5, 5}));
  EXPECT_EQ(x2.at({4, 4, 4}), 2.0);
  EXPECT_EQ(x2.at({5, 5, 5}), 4.0);
}

TEST(Autoregressive, BlockAverage) {
  const Dims d{2, 2};
  std::vector<DenseTensor> history{DenseTensor(d, 4.0), DenseTensor(d, 2.0), DenseTensor(d, 7.0)};
  ArSpec spec;
  spec.include_intercept_slab = false;
  spec.lag_blocks = {{2, 3}};
  const DenseTensor x = ar_covariate(history, 4, spec);
  EXPECT_EQ(x.dims(), (Dims{2, 2, 1}));
  for (double v : x.values()) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(Autoregressive, RejectsBadSpecs) {
  ArSpec spec;
  spec.include_intercept_slab = false;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec.lag_blocks = {{0}};
  EXPECT_THROW(spec.validate(), InvalidArgument);
  ArSpec trend;
  trend.trend_degree = 1;
  trend.lag_blocks = {{2}};
  EXPECT_THROW(trend.validate(), InvalidArgument);
  ArSpec ok;
  ok.lag_blocks = {{3}};
  std::vector<DenseTensor> history(2, DenseTensor({2}, 1.0));
  EXPECT_THROW(ar_covariate(history, 3, ok), InvalidArgument);
}

// ---- Radon operator ----

TEST(Radon, ZeroAndLinearity) {
  const RadonOperator op(8, 6, 7, 0, RadonBinning::linear);
  EXPECT_EQ(op.sinogram_dims(), (Dims{7, 32}));
  EXPECT_EQ(op.forward(DenseTensor({8, 6}, 0.0)).sum(), 0.0);
  Rng rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseTensor x = random_tensor({8, 6}, rng);
    const DenseTensor y = random_tensor({8, 6}, rng);
    const double a = rng.uniform(-2.0, 2.0);
    const double b = rng.uniform(-2.0, 2.0);
    DenseTensor combo({8, 6});
    combo.vec() = a * x.vec() + b * y.vec();
    DenseTensor expect({7, 32});
    expect.vec() = a * op.forward(x).vec() + b * op.forward(y).vec();
    EXPECT_LE(rel_err(op.forward(combo), expect), 1e-10);
  }
}

TEST(Radon, NearestBinningConservesMassPerAngle) {
  const RadonOperator op(9, 7, 11);
  Rng rng(43);
  const DenseTensor img = random_tensor({9, 7}, rng);
  const Matrix sino = matricize(op.forward(img), 1);
  for (Eigen::Index a = 0; a < sino.rows(); ++a) EXPECT_NEAR(sino.row(a).sum(), img.sum(), 1e-9);

  const RadonOperator lin(9, 7, 11, 0, RadonBinning::linear);
  const Matrix sino_l = matricize(lin.forward(img), 1);
  for (Eigen::Index a = 0; a < sino_l.rows(); ++a) EXPECT_NEAR(sino_l.row(a).sum(), img.sum(), 1e-9);
}

TEST(Radon, BasisHasOneUnitPerAngle) {
  const RadonOperator op(8, 8, 8);
  for (std::size_t n1 : {1u, 4u, 8u}) {
    for (std::size_t n2 : {1u, 5u}) {
      const Matrix b = matricize(op.basis({n1, n2}), 1);
      for (Eigen::Index a = 0; a < b.rows(); ++a) {
        EXPECT_EQ((b.row(a).array() != 0.0).count(), 1);
        EXPECT_EQ(b.row(a).sum(), 1.0);
      }
    }
  }
}

TEST(Radon, BasisAssemblyEqualsForward) {
  const RadonOperator op(8, 8, 8);
  Rng rng(44);
  const DenseTensor img = random_tensor({8, 8}, rng);
  DenseTensor sum(op.sinogram_dims(), 0.0);
  for (std::size_t n2 = 1; n2 <= 8; ++n2)
    for (std::size_t n1 = 1; n1 <= 8; ++n1) sum.vec() += img.at({n1, n2}) * op.basis({n1, n2}).vec();
  EXPECT_LE(rel_err(sum, op.forward(img)), 1e-12);
}

TEST(Radon, AdjointAgainstExplicitMatrix) {
  const RadonOperator op(6, 5, 9, 0, RadonBinning::linear);
  // Explicit dense matrix assembled column by column from the basis images.
  const std::size_t cells = 9 * op.radial_bins();
  Matrix dense(static_cast<Eigen::Index>(cells), 30);
  for (std::size_t n2 = 1; n2 <= 5; ++n2)
    for (std::size_t n1 = 1; n1 <= 6; ++n1) dense.col(static_cast<Eigen::Index>(n1 - 1 + 6 * (n2 - 1))) = op.basis({n1, n2}).vec();
  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseTensor x = random_tensor({6, 5}, rng);
    const DenseTensor y = random_tensor(op.sinogram_dims(), rng);
    const double lhs = op.forward(x).vec().dot(y.vec());
    const double rhs = x.vec().dot(op.adjoint(y).vec());
    EXPECT_LE(std::abs(lhs - rhs), 1e-8 * std::abs(lhs));
    EXPECT_LE(rel_err(Matrix(op.adjoint(y).vec()), Matrix(dense.transpose() * y.vec())), 1e-12);
  }
}

TEST(Radon, CellCovariateMatchesForward) {
  const RadonOperator op(5, 4, 6);
  Rng rng(46);
  const DenseTensor img = random_tensor({5, 4}, rng);
  const DenseTensor sino = op.forward(img);
  for (std::size_t a = 1; a <= 6; ++a) {
    for (std::size_t b = 1; b <= op.radial_bins(); b += 3) {
      EXPECT_NEAR(op.cell_covariate(a, b).vec().dot(img.vec()), sino.at({a, b}), 1e-12);
    }
  }
}

// ---- PET ----

TEST(Pet, SubsampleSize) {
  auto op = std::make_shared<const RadonOperator>(16, 16, 256, 1024);
  Rng rng(47);
  const PetProblem p = pet_simulate(DenseTensor({16, 16}, 0.5), op, 0.02, rng);
  EXPECT_EQ(p.cells.size(), 5242u);  // floor(0.02 * 262144)
  EXPECT_TRUE(std::is_sorted(p.cells.begin(), p.cells.end(), [&](const auto& l, const auto& r) {
    return l.first - 1 + 256 * (l.second - 1) < r.first - 1 + 256 * (r.second - 1);
  }));
}

TEST(Pet, SimulationIsDeterministic) {
  auto op = std::make_shared<const RadonOperator>(8, 8, 8);
  const DenseTensor truth = make_pet_truth(make_phantom(8, 8, PhantomKind::shepp_logan_like, 0.1), {2}, 10.0);
  Rng r1(48), r2(48);
  const PetProblem a = pet_simulate(truth, op, 0.3, r1);
  const PetProblem b = pet_simulate(truth, op, 0.3, r2);
  EXPECT_EQ(a.cells, b.cells);
  EXPECT_EQ(a.responses, b.responses);
}

TEST(Pet, PoissonMoments) {
  auto op = std::make_shared<const RadonOperator>(4, 4, 4);
  const DenseTensor truth({4, 4}, 0.5);
  const Matrix rates = op->matrix() * Eigen::Map<const Vector>(truth.values().data(), 16);
  const int draws = 1000;
  Vector mean = Vector::Zero(rates.rows());
  Rng rng(49);
  for (int n = 0; n < draws; ++n) {
    const PetProblem p = pet_simulate(truth, op, 1.0, rng);
    ASSERT_EQ(p.cells.size(), static_cast<std::size_t>(rates.rows()));
    for (std::size_t k = 0; k < p.cells.size(); ++k) mean[static_cast<Eigen::Index>(k)] += p.responses[k][0];
  }
  mean /= draws;
  for (Eigen::Index k = 0; k < rates.rows(); ++k) {
    const double sd = std::sqrt(rates(k, 0) / draws);
    EXPECT_LE(std::abs(mean[k] - rates(k, 0)), 3.0 * sd + 1e-15) << "cell " << k;
  }
}

TEST(Pet, PtotrViewDropsEmptyCells) {
  auto op = std::make_shared<const RadonOperator>(4, 4, 4);
  Rng rng(50);
  const PetProblem p = pet_simulate(DenseTensor({4, 4}, 1.0), op, 1.0, rng);
  const PtotrProblem q = pet_to_ptotr(p);
  std::size_t hit = 0;
  for (std::size_t k = 0; k < p.cells.size(); ++k) hit += op->cell_covariate(p.cells[k].first, p.cells[k].second).sum() > 0.0;
  EXPECT_EQ(q.size(), hit);
  EXPECT_LT(q.size(), p.cells.size());
  EXPECT_NO_THROW(q.validate());
}

TEST(Pet, MlemOneIterationEqualsMmStep) {
  auto op = std::make_shared<const RadonOperator>(6, 6, 6);
  const DenseTensor truth = make_pet_truth(make_phantom(6, 6, PhantomKind::blocks, 0.2), {2, 2}, 20.0);
  Rng rng(51);
  const PetProblem p = pet_simulate(truth, op, 1.0, rng);
  const MmProblem m = pet_mlem_problem(p);
  const Matrix c1 = mm_step(m.c_init, m);  // J x pixels
  const MlemResult r = pet_reconstruct_mlem(p, 1);
  const Matrix est = Eigen::Map<const Matrix>(r.estimate.values().data(), 36, 4).transpose();
  EXPECT_LE(rel_err(est, c1), 1e-12);
  ASSERT_EQ(r.rmse_trajectory.size(), 2u);
  EXPECT_TRUE(r.unobserved_pixels.empty());
}

TEST(Pet, MlemFitsNoiselessData) {
  auto op = std::make_shared<const RadonOperator>(6, 6, 8);
  DenseTensor img({6, 6});
  for (std::size_t k = 0; k < img.size(); ++k) img[k] = static_cast<double>(1 + k % 5);
  PetProblem p;
  p.op = op;
  p.response_dims = {1};
  const DenseTensor sino = op->forward(img);
  for (std::size_t b = 1; b <= op->radial_bins(); ++b) {
    for (std::size_t a = 1; a <= op->num_angles(); ++a) {
      p.cells.emplace_back(a, b);
      p.responses.push_back(DenseTensor({1}, sino.at({a, b})));
    }
  }
  const MlemResult r = pet_reconstruct_mlem(p, 3000);
  const DenseTensor proj = op->forward(DenseTensor({6, 6}, std::vector<double>(r.estimate.values().begin(), r.estimate.values().end())));
  EXPECT_LE((proj.vec() - sino.vec()).norm() / sino.vec().norm(), 1e-3);
  const auto& f = r.objective_trajectory;
  for (std::size_t k = 1; k < f.size(); ++k) EXPECT_GE(f[k], f[k - 1] - 1e-8 * std::abs(f[k - 1]));
}

TEST(Pet, MlemRmseHasInteriorMinimumOnNoisySubsample) {
  auto op = std::make_shared<const RadonOperator>(16, 16, 16);
  DenseTensor truth = make_phantom(16, 16, PhantomKind::shepp_logan_like, 0.05);
  for (double& v : truth.values()) v *= 5.0;
  Rng rng(52);
  const PetProblem p = pet_simulate(truth, op, 0.25, rng);
  const MlemResult r = pet_reconstruct_mlem(p, 200);
  const auto it = std::min_element(r.rmse_trajectory.begin(), r.rmse_trajectory.end());
  EXPECT_LT(std::distance(r.rmse_trajectory.begin(), it), static_cast<std::ptrdiff_t>(r.rmse_trajectory.size()) - 1);
}

TEST(Pet, PtotrRecoversLowRankTruth) {
  auto op = std::make_shared<const RadonOperator>(16, 16, 16);
  const DenseTensor truth = make_pet_truth(make_phantom(16, 16, PhantomKind::blocks, 0.5), {2, 2}, 50.0);
  Rng rng(53);
  PetProblem p = pet_simulate(truth, op, 1.0, rng);
  // Zero noise: responses are the rounded rates.
  for (std::size_t k = 0; k < p.cells.size(); ++k) {
    const DenseTensor r = op->cell_covariate(p.cells[k].first, p.cells[k].second);
    const DenseTensor rates = partial_contract(r, truth);
    for (std::size_t m = 0; m < rates.size(); ++m) p.responses[k][m] = std::round(rates[m]);
  }
  FitConfig cfg;
  cfg.rank = 4;
  cfg.restarts = 1;
  cfg.seed = 5;
  cfg.outer_tol = 1e-10;
  cfg.inner_max_iter = 10;
  cfg.outer_max_sweeps = 300;
  const PetPtotrResult res = pet_reconstruct_ptotr(p, cfg);
  const double range = *std::max_element(truth.values().begin(), truth.values().end()) -
                       *std::min_element(truth.values().begin(), truth.values().end());
  EXPECT_LE(rmse(res.estimate, truth), 0.05 * range);
  ASSERT_EQ(res.rmse_trajectory.size(), res.fit.sweeps);
  const auto& t = res.rmse_trajectory;
  const std::size_t from = t.size() > 50 ? t.size() - 50 : 1;
  for (std::size_t s = from; s < t.size(); ++s) EXPECT_LE(t[s], t[s - 1] * (1.0 + 1e-6));
}

TEST(Pet, PtotrRankOneRecovery) {
  auto op = std::make_shared<const RadonOperator>(8, 8, 12);
  CpTensor b;
  Rng rng(54);
  b = normalize_cp(random_cp({8, 8}, {2}, 1, rng));
  b.weights[0] = 5.0e5;
  const DenseTensor truth = cp_reconstruct(b);
  Rng sim(55);
  const PetProblem p = pet_simulate(truth, op, 1.0, sim);
  FitConfig cfg;
  cfg.rank = 1;
  cfg.restarts = 2;
  cfg.seed = 6;
  cfg.outer_tol = 1e-10;
  const PetPtotrResult res = pet_reconstruct_ptotr(p, cfg);
  EXPECT_LE((res.estimate.vec() - truth.vec()).norm() / truth.vec().norm(), 1e-2);
}

TEST(Pet, Rmse) {
  Rng rng(56);
  const DenseTensor a = random_tensor({3, 4, 2}, rng);
  EXPECT_EQ(rmse(a, a), 0.0);
  DenseTensor shifted = a;
  for (double& v : shifted.values()) v += 1.0;
  EXPECT_NEAR(rmse(shifted, a), 1.0, 1e-15);
  const DenseTensor b = random_tensor({3, 4, 2}, rng);
  double ss = 0.0;
  for (std::size_t i = 1; i <= 3; ++i)
    for (std::size_t j = 1; j <= 4; ++j)
      for (std::size_t k = 1; k <= 2; ++k) ss += std::pow(a.at({i, j, k}) - b.at({i, j, k}), 2);
  EXPECT_NEAR(rmse(a, b), std::sqrt(ss / 24.0), 1e-12 * std::sqrt(ss / 24.0));
  EXPECT_THROW(rmse(a, DenseTensor({3, 4})), DimensionError);
}

// ---- change points ----

namespace {

std::vector<DenseTensor> small_series(Rng& rng, std::size_t t_len, std::size_t tau, double a) {
  return make_changepoint_series(3, 4, 5, t_len, tau, a, 2, rng);
}

}  // namespace

TEST(Changepoint, SimplifiedUpdatesMatchGeneral) {
  Rng rng(57);
  for (int trial = 0; trial < 20; ++trial) {
    const auto series = small_series(rng, 6, 1 + rng.below(5), 4.0);
    const std::size_t tau = rng.below(6);
    const GroupedCounts g = group_series(series, tau);
    const PtotrProblem prob = ptanova_problem(series, tau);
    const std::size_t rank = 1 + rng.below(3);
    const CpTensor b = normalize_cp(random_cp({g.groups()}, {3, 4, 5}, rank, rng));
    EXPECT_NEAR(grouped_loglik(g, b), loglikelihood(prob, b), 1e-10 * std::abs(loglikelihood(prob, b)));
    const Matrix v = random_matrix(static_cast<Eigen::Index>(g.groups()), static_cast<Eigen::Index>(rank), rng);
    EXPECT_LE(rel_err(ptanova_v_step(g, b, v), covariate_update_step(prob, b, 1, v)), 1e-10);
    for (std::size_t p = 1; p <= 3; ++p) {
      const Matrix u = random_matrix(b.response_factors[p - 1].rows(), static_cast<Eigen::Index>(rank), rng);
      EXPECT_LE(rel_err(ptanova_u_step(g, b, p, u), response_update_step(prob, b, p, u)), 1e-10);
    }
  }
}

TEST(Changepoint, GroupedLoglikMatchesPerObservationLoglik) {
  Rng rng(58);
  const auto series = small_series(rng, 7, 3, 5.0);
  const GroupedCounts g = group_series(series, 3);
  EXPECT_EQ(g.counts, (std::vector<double>{3.0, 4.0}));
  const CpTensor b = normalize_cp(random_cp({2}, {3, 4, 5}, 2, rng));
  double direct = 0.0;
  for (std::size_t t = 1; t <= 7; ++t) {
    const DenseTensor rate = partial_contract(DenseTensor({2}, std::vector<double>{t <= 3 ? 1.0 : 0.0, t <= 3 ? 0.0 : 1.0}), b);
    for (std::size_t k = 0; k < rate.size(); ++k) direct += series[t - 1][k] * std::log(rate[k]) - rate[k];
  }
  EXPECT_NEAR(grouped_loglik(g, b), direct, 1e-10 * std::abs(direct));
}

TEST(Changepoint, SingletonCandidates) {
  Rng rng(59);
  FitConfig cfg;
  cfg.rank = 2;
  cfg.restarts = 2;
  const auto two = small_series(rng, 2, 1, 3.0);
  EXPECT_EQ(changepoint_scan(two, cfg).tau_hat, 1u);
  const auto six = small_series(rng, 6, 2, 3.0);
  const ChangePointResult r = changepoint_scan(six, cfg, {3});
  EXPECT_EQ(r.tau_hat, 3u);
  EXPECT_EQ(r.taus, (std::vector<std::size_t>{3}));
  EXPECT_THROW(changepoint_scan(six, cfg, {6}), InvalidArgument);
}

TEST(Changepoint, FullSizeSeriesFindsTrueChange) {
  Rng rng(60);
  const auto series = make_changepoint_series(10, 10, 15, 14, 6, 8.0, 1, rng);
  FitConfig cfg;
  cfg.rank = 4;
  cfg.restarts = 10;
  cfg.seed = 1;
  cfg.outer_tol = 1e-4;
  cfg.inner_max_iter = 5;
  const ChangePointResult r = changepoint_scan(series, cfg);
  EXPECT_EQ(r.tau_hat, 6u);
  EXPECT_EQ(r.loglik_by_tau.size(), 13u);
  for (std::size_t k = 0; k < 13; ++k) {
    EXPECT_NEAR(r.lambda_by_tau[k], 2.0 * (r.loglik_by_tau[k] - r.null_loglik), 1e-9);
  }
}

TEST(Changepoint, ScanIsThreadInvariant) {
  Rng rng(61);
  const auto series = small_series(rng, 5, 2, 4.0);
  FitConfig cfg;
  cfg.rank = 2;
  cfg.restarts = 3;
  cfg.threads = 1;
  const ChangePointResult a = changepoint_scan(series, cfg);
  cfg.threads = 4;
  const ChangePointResult b = changepoint_scan(series, cfg);
  EXPECT_EQ(a.loglik_by_tau, b.loglik_by_tau);
  EXPECT_EQ(a.null_loglik, b.null_loglik);
}
