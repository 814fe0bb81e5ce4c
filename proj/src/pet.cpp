#include "ptotr/pet.hpp"

#include "ptotr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ptotr {

Dims PetProblem::image_dims() const {
  Dims d = op->image_dims();
  if (!(response_dims.size() == 1 && response_dims[0] == 1)) d.insert(d.end(), response_dims.begin(), response_dims.end());
  return d;
}

void PetProblem::validate() const {
  if (!op) throw InvalidArgument("PET problem has no operator");
  if (cells.size() != responses.size()) throw DimensionError("PET problem: cell and response counts differ");
  if (cells.empty()) throw InvalidArgument("PET problem has no measurements");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (cells[k].first < 1 || cells[k].first > op->num_angles() || cells[k].second < 1 ||
        cells[k].second > op->radial_bins()) {
      throw DimensionError("PET problem: sinogram cell out of range");
    }
    if (responses[k].dims() != response_dims) throw DimensionError("PET problem: response extents differ");
  }
  if (truth && truth->dims() != image_dims()) throw DimensionError("PET problem: truth extents differ");
}

namespace {

// Image as (N1 N2) x J with J = prod of the response extents.
Eigen::Map<const Matrix> image_matrix(const DenseTensor& img, std::size_t pixels) {
  return {img.values().data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(img.size() / pixels)};
}

std::size_t cell_row(const PetProblem& p, std::size_t k) {
  return (p.cells[k].first - 1) + p.op->num_angles() * (p.cells[k].second - 1);
}

}  // namespace

PetProblem pet_simulate(const DenseTensor& truth, std::shared_ptr<const RadonOperator> op, double fraction, Rng& rng) {
  if (!op) throw InvalidArgument("pet_simulate: no operator");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("pet_simulate: fraction must lie in (0, 1]");
  const Dims img = op->image_dims();
  if (truth.order() < 2 || truth.dims()[0] != img[0] || truth.dims()[1] != img[1]) {
    throw DimensionError("pet_simulate: leading truth extents must match the operator image");
  }
  for (double v : truth.values()) {
    if (!(v > 0.0)) throw InvalidArgument("pet_simulate: truth must be strictly positive");
  }
  PetProblem p;
  p.response_dims = truth.order() == 2 ? Dims{1} : Dims(truth.dims().begin() + 2, truth.dims().end());
  p.truth = truth;
  const std::size_t pixels = img[0] * img[1];
  const Matrix rates = op->matrix() * image_matrix(truth, pixels);  // cells x J

  const std::size_t total = op->num_angles() * op->radial_bins();
  const auto keep = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total)));
  if (keep == 0) throw InvalidArgument("pet_simulate: fraction keeps no cells");
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < keep; ++k) {
    std::swap(order[k], order[k + rng.below(total - k)]);
  }
  order.resize(keep);
  std::sort(order.begin(), order.end());

  const std::size_t na = op->num_angles();
  for (std::size_t row : order) {
    p.cells.emplace_back(row % na + 1, row / na + 1);
    DenseTensor y(p.response_dims, 0.0);
    for (std::size_t m = 0; m < y.size(); ++m) {
      y[m] = static_cast<double>(sample_poisson(rates(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(m)), rng));
    }
    p.responses.push_back(std::move(y));
  }
  p.op = std::move(op);
  return p;
}

PtotrProblem pet_to_ptotr(const PetProblem& problem) {
  problem.validate();
  PtotrProblem out;
  for (std::size_t k = 0; k < problem.cells.size(); ++k) {
    DenseTensor x = problem.op->cell_covariate(problem.cells[k].first, problem.cells[k].second);
    if (x.sum() <= 0.0) continue;
    out.covariates.push_back(std::move(x));
    out.responses.push_back(problem.responses[k]);
  }
  if (out.responses.empty()) throw InvalidArgument("PET problem: no retained cell sees the image");
  return out;
}

PetPtotrResult pet_reconstruct_ptotr(const PetProblem& problem, const FitConfig& cfg) {
  const PtotrProblem pp = pet_to_ptotr(problem);
  std::vector<std::vector<double>> per_restart(cfg.restarts);
  SweepObserver observer;
  if (problem.truth) {
    observer = [&](std::size_t k, std::size_t, const CpTensor& b) {
      const DenseTensor full = cp_reconstruct(b);
      const DenseTensor est(problem.truth->dims(), std::vector<double>(full.values().begin(), full.values().end()));
      per_restart[k].push_back(rmse(est, *problem.truth));
    };
  }
  PetPtotrResult res;
  res.fit = fit(pp, cfg, observer);
  const DenseTensor full = cp_reconstruct(res.fit.coefficient);
  res.estimate = DenseTensor(problem.image_dims(), std::vector<double>(full.values().begin(), full.values().end()));
  if (problem.truth) res.rmse_trajectory = std::move(per_restart[res.fit.best_restart]);
  return res;
}

namespace {

struct MlemSetup {
  Matrix y;                                   // J x I
  Eigen::SparseMatrix<double> d;              // pixels x I
  Vector d_row_sums;                          // per pixel
  Matrix c0;                                  // J x pixels
};

MlemSetup mlem_setup(const PetProblem& problem) {
  problem.validate();
  const std::size_t pixels = problem.op->image_dims()[0] * problem.op->image_dims()[1];
  const auto j = static_cast<Eigen::Index>(num_elements(problem.response_dims));
  const auto n = static_cast<Eigen::Index>(problem.cells.size());
  MlemSetup s;
  s.y.resize(j, n);
  std::vector<Eigen::Triplet<double>> entries;
  const auto& at = problem.op->matrix();
  Eigen::SparseMatrix<double, Eigen::RowMajor> rows = at;
  Eigen::Index kept = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(cell_row(problem, static_cast<std::size_t>(k)));
    if (rows.row(r).nonZeros() == 0) continue;  // the ray misses the image
    s.y.col(kept) = problem.responses[static_cast<std::size_t>(k)].vec();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(rows, r); it; ++it) {
      entries.emplace_back(static_cast<int>(it.col()), static_cast<int>(kept), it.value());
    }
    ++kept;
  }
  s.y.conservativeResize(j, kept);
  s.d.resize(static_cast<Eigen::Index>(pixels), kept);
  s.d.setFromTriplets(entries.begin(), entries.end());
  s.d_row_sums = s.d * Vector::Ones(kept);
  const double total_d = s.d_row_sums.sum();
  if (!(total_d > 0.0)) throw InvalidArgument("ML-EM: no retained cell sees the image");
  const double total_y = s.y.sum();
  if (!(total_y > 0.0)) throw NonexistenceError("ML-EM: all responses are zero");
  s.c0 = Matrix::Constant(j, static_cast<Eigen::Index>(pixels), total_y / (static_cast<double>(j) * total_d));
  return s;
}

}  // namespace

MmProblem pet_mlem_problem(const PetProblem& problem) {
  const MlemSetup s = mlem_setup(problem);
  if ((s.d_row_sums.array() <= 0.0).any()) throw InvalidArgument("pet_mlem_problem: some pixel is seen by no retained cell");
  MmProblem p;
  p.y = s.y;
  p.d = Matrix(s.d);
  p.c_init = s.c0;
  return p;
}

MlemResult pet_reconstruct_mlem(const PetProblem& problem, std::size_t max_iter) {
  const MlemSetup s = mlem_setup(problem);
  const std::size_t pixels = static_cast<std::size_t>(s.d.rows());
  MlemResult res;
  for (std::size_t n = 0; n < pixels; ++n) {
    if (!(s.d_row_sums[static_cast<Eigen::Index>(n)] > 0.0)) res.unobserved_pixels.push_back(n);
  }
  for (std::size_t j = 0; j < static_cast<std::size_t>(s.y.rows()); ++j) {
    if (!(s.y.row(static_cast<Eigen::Index>(j)).array() > 0.0).any()) res.dne_rows.push_back(j + 1);
  }
  const Eigen::SparseMatrix<double> dt = s.d.transpose();
  const MmEvaluator eval = [&](const Matrix& c, Matrix* phi) {
    const Matrix rates = c * s.d;
    const double f = poisson_objective(s.y, rates);
    if (phi) {
      *phi = poisson_ratio(s.y, rates) * dt;
      for (Eigen::Index n = 0; n < phi->cols(); ++n) {
        const double den = s.d_row_sums[n];
        if (den > 0.0) {
          phi->col(n) /= den;
        } else {
          phi->col(n).setOnes();
        }
      }
    }
    return f;
  };

  const Dims out_dims = problem.image_dims();
  auto to_image = [&](const Matrix& c) {
    const Matrix t = c.transpose();
    return DenseTensor(out_dims, std::vector<double>(t.data(), t.data() + t.size()));
  };
  MmOptions opts;
  opts.tol = 0.0;
  opts.max_iter = max_iter;
  if (problem.truth) {
    res.rmse_trajectory.push_back(rmse(to_image(s.c0), *problem.truth));
    opts.observer = [&](std::size_t, const Matrix& c, double) {
      res.rmse_trajectory.push_back(rmse(to_image(c), *problem.truth));
    };
  }
  MmResult mm = run_mm(eval, s.c0, opts);
  res.objective_trajectory = std::move(mm.objective_trajectory);
  res.estimate = to_image(mm.c);
  return res;
}

DenseTensor make_pet_truth(const DenseTensor& image, const Dims& response_dims, double scale) {
  if (image.order() != 2) throw DimensionError("make_pet_truth: image must be 2-D");
  if (!(scale > 0.0)) throw InvalidArgument("make_pet_truth: scale must be positive");
  Dims dims = image.dims();
  dims.insert(dims.end(), response_dims.begin(), response_dims.end());
  const std::size_t j = num_elements(response_dims);
  DenseTensor out(dims, 0.0);
  for (std::size_t k = 0; k < j; ++k) {
    const double g = scale * (0.5 + static_cast<double>(k) / static_cast<double>(j));
    for (std::size_t n = 0; n < image.size(); ++n) out[n + k * image.size()] = g * image[n];
  }
  return out;
}

double rmse(const DenseTensor& est, const DenseTensor& truth) {
  if (est.dims() != truth.dims()) throw DimensionError("rmse: extents differ");
  return std::sqrt((est.vec() - truth.vec()).squaredNorm() / static_cast<double>(truth.size()));
}

}  // namespace ptotr
