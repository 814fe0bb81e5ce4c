#include "ptotr/tensor.hpp"

#include "ptotr/errors.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace ptotr {

std::size_t num_elements(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty()) throw DimensionError("tensor must have at least one mode");
  for (std::size_t d : dims) {
    if (d == 0) throw DimensionError("tensor extents must be >= 1");
  }
}

// Strides of the modes other than `skip` in the unfolded column index.
std::vector<std::size_t> unfolding_strides(const Dims& dims, std::size_t skip) {
  std::vector<std::size_t> strides(dims.size(), 0);
  std::size_t s = 1;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k == skip) continue;
    strides[k] = s;
    s *= dims[k];
  }
  return strides;
}

}  // namespace

DenseTensor::DenseTensor() : dims_{1}, values_(1, 0.0) {}

DenseTensor::DenseTensor(Dims dims, double fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  values_.assign(num_elements(dims_), fill);
}

DenseTensor::DenseTensor(Dims dims, std::vector<double> values)
    : dims_(std::move(dims)), values_(std::move(values)) {
  check_dims(dims_);
  if (values_.size() != num_elements(dims_)) {
    throw DimensionError("value count " + std::to_string(values_.size()) +
                         " does not match extents (" + std::to_string(num_elements(dims_)) + ")");
  }
}

DenseTensor DenseTensor::scalar(double value) { return DenseTensor({1}, {value}); }

std::size_t DenseTensor::offset(const MultiIndex& index) const {
  if (index.size() != dims_.size()) throw DimensionError("multi-index order mismatch");
  std::size_t off = 0;
  std::size_t stride = 1;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (index[k] < 1 || index[k] > dims_[k]) {
      throw DimensionError("index " + std::to_string(index[k]) + " out of range for mode " +
                           std::to_string(k + 1));
    }
    off += (index[k] - 1) * stride;
    stride *= dims_[k];
  }
  return off;
}

double DenseTensor::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

Dims CpTensor::covariate_dims() const {
  Dims d;
  for (const auto& v : covariate_factors) d.push_back(static_cast<std::size_t>(v.rows()));
  return d;
}

Dims CpTensor::response_dims() const {
  Dims d;
  for (const auto& u : response_factors) d.push_back(static_cast<std::size_t>(u.rows()));
  return d;
}

Dims CpTensor::dims() const {
  Dims d = covariate_dims();
  Dims r = response_dims();
  d.insert(d.end(), r.begin(), r.end());
  return d;
}

void CpTensor::validate() const {
  const auto r = weights.size();
  if (r < 1) throw InvalidArgument("CP rank must be >= 1");
  if (covariate_factors.empty() && response_factors.empty()) {
    throw InvalidArgument("CP tensor needs at least one factor matrix");
  }
  if ((weights.array() <= 0.0).any()) throw InvalidArgument("CP weights must be positive");
  auto check = [r](const Matrix& f) {
    if (f.cols() != r) throw DimensionError("factor column count differs from rank");
    if (f.rows() < 1) throw DimensionError("factor matrix has no rows");
    if ((f.array() <= 0.0).any()) throw InvalidArgument("factor entries must be positive");
  };
  for (const auto& v : covariate_factors) check(v);
  for (const auto& u : response_factors) check(u);
}

bool CpTensor::is_normalized(double tol) const {
  auto unit = [tol](const Matrix& f) {
    return ((f.colwise().sum().array() - 1.0).abs() <= tol).all();
  };
  for (const auto& v : covariate_factors) {
    if (!unit(v)) return false;
  }
  for (const auto& u : response_factors) {
    if (!unit(u)) return false;
  }
  for (Eigen::Index r = 1; r < weights.size(); ++r) {
    if (weights[r] > weights[r - 1]) return false;
  }
  return true;
}

Matrix matricize(const DenseTensor& t, std::size_t mode) {
  const Dims& dims = t.dims();
  if (mode < 1 || mode > dims.size()) throw DimensionError("matricize: mode out of range");
  const std::size_t m = mode - 1;
  const std::size_t rows = dims[m];
  const std::size_t cols = t.size() / rows;
  Matrix out(rows, cols);
  const auto strides = unfolding_strides(dims, m);

  std::vector<std::size_t> idx(dims.size(), 0);
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    std::size_t col = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) col += idx[k] * strides[k];
    out(static_cast<Eigen::Index>(idx[m]), static_cast<Eigen::Index>(col)) = t[flat];
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

DenseTensor dematricize(const Matrix& mat, const Dims& dims, std::size_t mode) {
  check_dims(dims);
  if (mode < 1 || mode > dims.size()) throw DimensionError("dematricize: mode out of range");
  const std::size_t m = mode - 1;
  const std::size_t total = num_elements(dims);
  if (static_cast<std::size_t>(mat.rows()) != dims[m] ||
      static_cast<std::size_t>(mat.size()) != total) {
    throw DimensionError("dematricize: matrix shape does not match extents");
  }
  DenseTensor t(dims);
  const auto strides = unfolding_strides(dims, m);
  std::vector<std::size_t> idx(dims.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t col = 0;
    for (std::size_t k = 0; k < dims.size(); ++k) col += idx[k] * strides[k];
    t[flat] = mat(static_cast<Eigen::Index>(idx[m]), static_cast<Eigen::Index>(col));
    for (std::size_t k = 0; k < dims.size(); ++k) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return t;
}

Matrix khatri_rao(std::span<const Matrix> matrices) {
  if (matrices.empty()) throw InvalidArgument("khatri_rao: empty matrix list");
  const Eigen::Index r = matrices.front().cols();
  for (const auto& m : matrices) {
    if (m.cols() != r) throw DimensionError("khatri_rao: mismatched column counts");
  }
  Matrix acc = matrices.front();
  for (std::size_t k = 1; k < matrices.size(); ++k) {
    const Matrix& next = matrices[k];
    Matrix out(acc.rows() * next.rows(), r);
    for (Eigen::Index c = 0; c < r; ++c) {
      for (Eigen::Index i = 0; i < acc.rows(); ++i) {
        out.col(c).segment(i * next.rows(), next.rows()) = acc(i, c) * next.col(c);
      }
    }
    acc = std::move(out);
  }
  return acc;
}

Matrix khatri_rao_decreasing(std::span<const Matrix> factors, std::size_t rank, std::size_t skip) {
  std::vector<Matrix> ordered;
  ordered.reserve(factors.size());
  for (std::size_t k = factors.size(); k-- > 0;) {
    if (k == skip) continue;
    ordered.push_back(factors[k]);
  }
  if (ordered.empty()) return Matrix::Ones(1, static_cast<Eigen::Index>(rank));
  return khatri_rao(ordered);
}

DenseTensor cp_reconstruct(const CpTensor& c) {
  c.validate();
  std::vector<Matrix> all(c.covariate_factors);
  all.insert(all.end(), c.response_factors.begin(), c.response_factors.end());
  const Matrix kr = khatri_rao_decreasing(all, c.rank());
  Vector v = kr * c.weights;
  return DenseTensor(c.dims(), std::vector<double>(v.data(), v.data() + v.size()));
}

DenseTensor partial_contract(const DenseTensor& x, const DenseTensor& b) {
  const Dims& xd = x.dims();
  const Dims& bd = b.dims();
  if (bd.size() <= xd.size() || !std::equal(xd.begin(), xd.end(), bd.begin())) {
    throw DimensionError("partial_contract: leading extents of b must equal the extents of x");
  }
  Dims out_dims(bd.begin() + static_cast<std::ptrdiff_t>(xd.size()), bd.end());
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(num_elements(out_dims));
  Eigen::Map<const Matrix> bmat(b.values().data(), n, m);
  Vector out = bmat.transpose() * x.vec();
  return DenseTensor(std::move(out_dims), std::vector<double>(out.data(), out.data() + out.size()));
}

DenseTensor partial_contract(const DenseTensor& x, const CpTensor& b) {
  const Dims cov = b.covariate_dims();
  if (cov.empty()) {
    if (x.size() != 1) throw DimensionError("partial_contract: CP tensor without covariate modes needs a 1-element x");
  } else if (x.dims() != cov) {
    throw DimensionError("partial_contract: covariate extents do not match x");
  }
  if (b.response_factors.empty()) throw DimensionError("partial_contract: CP tensor has no response modes");
  const Matrix kv = khatri_rao_decreasing(b.covariate_factors, b.rank());
  const Matrix ku = khatri_rao_decreasing(b.response_factors, b.rank());
  Vector w = kv.transpose() * x.vec();
  Vector out = ku * (b.weights.asDiagonal() * w);
  return DenseTensor(b.response_dims(), std::vector<double>(out.data(), out.data() + out.size()));
}

CpTensor normalize_cp(CpTensor c) {
  c.validate();
  const auto r = static_cast<Eigen::Index>(c.rank());
  auto absorb = [&c](Matrix& f) {
    const Eigen::RowVectorXd sums = f.colwise().sum();
    for (Eigen::Index k = 0; k < sums.size(); ++k) {
      if (!(sums[k] > 0.0)) throw InvalidArgument("normalize_cp: corrupt factor column with non-positive sum");
      f.col(k) /= sums[k];
      c.weights[k] *= sums[k];
    }
  };
  for (auto& v : c.covariate_factors) absorb(v);
  for (auto& u : c.response_factors) absorb(u);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&c](Eigen::Index a, Eigen::Index b) { return c.weights[a] > c.weights[b]; });
  if (std::is_sorted(order.begin(), order.end())) return c;

  auto permute = [&order](const Matrix& f) {
    Matrix out(f.rows(), f.cols());
    for (std::size_t k = 0; k < order.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = f.col(order[k]);
    return out;
  };
  Vector w(r);
  for (std::size_t k = 0; k < order.size(); ++k) w[static_cast<Eigen::Index>(k)] = c.weights[order[k]];
  c.weights = std::move(w);
  for (auto& v : c.covariate_factors) v = permute(v);
  for (auto& u : c.response_factors) u = permute(u);
  return c;
}

}  // namespace ptotr
