#include "reltask/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace reltask {

namespace {

using EMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMatrix>;
using ECMap = Eigen::Map<const EMatrix>;

ECMap as_matrix(const Tensor& t) {
  if (t.rank() == 1) return ECMap(t.data(), 1, t.size());
  if (t.rank() != 2)
    fail(ErrorKind::kDimension, "expected rank-2 tensor, got rank " +
                                    std::to_string(t.rank()));
  return ECMap(t.data(), static_cast<Eigen::Index>(t.rows()),
               static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (std::size_t s : shape_) n *= s;
  data_.assign(n, fill);
}

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape_ = {values.size()};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  if (values.size() != rows * cols)
    fail(ErrorKind::kDimension, "matrix literal has wrong element count");
  Tensor t;
  t.shape_ = {rows, cols};
  t.data_ = std::move(values);
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::gaussian(std::vector<std::size_t> shape, double stddev,
                        Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t.at(i) = stddev * rng.normal();
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() != 2) fail(ErrorKind::kDimension, "rows(): tensor is not 2-D");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() != 2) fail(ErrorKind::kDimension, "cols(): tensor is not 2-D");
  return shape_[1];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::sum() const {
  return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double Tensor::frobenius_norm() const { return std::sqrt(dot(*this, *this)); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (!same_shape(other)) fail(ErrorKind::kDimension, "operator+=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  if (!same_shape(other)) fail(ErrorKind::kDimension, "operator-=: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scalar) {
  for (double& v : data_) v *= scalar;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double s) { return a *= s; }

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  ECMap ma = as_matrix(a);
  ECMap mb = as_matrix(b);
  const Eigen::Index ar = trans_a ? ma.cols() : ma.rows();
  const Eigen::Index ac = trans_a ? ma.rows() : ma.cols();
  const Eigen::Index br = trans_b ? mb.cols() : mb.rows();
  const Eigen::Index bc = trans_b ? mb.rows() : mb.cols();
  if (ac != br)
    fail(ErrorKind::kDimension,
         "matmul: inner extents disagree (" + std::to_string(ac) + " vs " +
             std::to_string(br) + ")");
  Tensor out(static_cast<std::size_t>(ar), static_cast<std::size_t>(bc));
  EMap mo(out.data(), ar, bc);
  if (!trans_a && !trans_b)
    mo.noalias() = ma * mb;
  else if (trans_a && !trans_b)
    mo.noalias() = ma.transpose() * mb;
  else if (!trans_a && trans_b)
    mo.noalias() = ma * mb.transpose();
  else
    mo.noalias() = ma.transpose() * mb.transpose();
  return out;
}

Tensor transpose(const Tensor& m) {
  ECMap mm = as_matrix(m);
  Tensor out(static_cast<std::size_t>(mm.cols()),
             static_cast<std::size_t>(mm.rows()));
  EMap(out.data(), mm.cols(), mm.rows()) = mm.transpose();
  return out;
}

Tensor softmax_rows(const Tensor& m) {
  if (m.rank() != 2) fail(ErrorKind::kDimension, "softmax_rows: tensor is not 2-D");
  Tensor out(m.rows(), m.cols());
  const std::size_t c = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) row_max = std::max(row_max, m.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(m.at(i, j) - row_max);
      out.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) out.at(i, j) /= denom;
  }
  return out;
}

Tensor solve_spd(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.rows() != a.cols())
    fail(ErrorKind::kDimension, "solve_spd: matrix is not square");
  const std::size_t n = a.rows();
  const std::size_t nrhs = (b.rank() == 1) ? 1 : b.cols();
  if ((b.rank() == 1 ? b.size() : b.rows()) != n)
    fail(ErrorKind::kDimension, "solve_spd: right-hand side has wrong length");

  // Lower Cholesky factor, in place on a copy. A failed pivot means the
  // matrix is not SPD to working precision; the pivot index goes into the
  // error message.
  Tensor l = a;
  for (std::size_t j = 0; j < n; ++j) {
    double d = l.at(j, j);
    for (std::size_t p = 0; p < j; ++p) d -= l.at(j, p) * l.at(j, p);
    if (!(d > 0.0) || !std::isfinite(d))
      fail(ErrorKind::kSingular,
           "solve_spd: matrix is not positive definite at pivot " +
               std::to_string(j));
    const double root = std::sqrt(d);
    l.at(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = l.at(i, j);
      for (std::size_t p = 0; p < j; ++p) v -= l.at(i, p) * l.at(j, p);
      l.at(i, j) = v / root;
    }
  }

  Tensor x = b;
  auto entry = [&](std::size_t i, std::size_t r) -> double& {
    return (b.rank() == 1) ? x.at(i) : x.at(i, r);
  };
  for (std::size_t r = 0; r < nrhs; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = entry(i, r);
      for (std::size_t p = 0; p < i; ++p) v -= l.at(i, p) * entry(p, r);
      entry(i, r) = v / l.at(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double v = entry(ii, r);
      for (std::size_t p = ii + 1; p < n; ++p) v -= l.at(p, ii) * entry(p, r);
      entry(ii, r) = v / l.at(ii, ii);
    }
  }
  return x;
}

std::vector<double> singular_values(const Tensor& a) {
  ECMap ma = as_matrix(a);
  Eigen::JacobiSVD<EMatrix> svd(ma);
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

double determinant(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols())
    fail(ErrorKind::kDimension, "determinant: matrix is not square");
  ECMap ma = as_matrix(a);
  return Eigen::FullPivLU<EMatrix>(ma).determinant();
}

Tensor solve_general(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || a.rows() != a.cols())
    fail(ErrorKind::kDimension, "solve_general: matrix is not square");
  if ((b.rank() == 1 ? b.size() : b.rows()) != a.rows())
    fail(ErrorKind::kDimension, "solve_general: rhs length mismatch");
  ECMap ma = as_matrix(a);
  Eigen::FullPivLU<EMatrix> lu(ma);
  if (!lu.isInvertible())
    fail(ErrorKind::kSingular, "solve_general: matrix is singular");
  const std::size_t nrhs = b.rank() == 1 ? 1 : b.cols();
  Tensor out = b;
  Eigen::Map<EMatrix> mb(out.data(), static_cast<Eigen::Index>(a.rows()),
                         static_cast<Eigen::Index>(nrhs));
  mb = lu.solve(EMatrix(mb));
  return out;
}

double condition_number(const Tensor& a) {
  if (a.rank() != 2 || a.rows() != a.cols())
    fail(ErrorKind::kDimension, "condition_number: matrix is not square");
  const std::vector<double> sv = singular_values(a);
  const double smax = sv.front();
  const double smin = sv.back();
  if (smax == 0.0 || smin < 1e-14 * smax)
    return std::numeric_limits<double>::infinity();
  return smax / smin;
}

Tensor top_eigenvectors_sym(const Tensor& a, std::size_t r) {
  if (a.rank() != 2 || a.rows() != a.cols())
    fail(ErrorKind::kDimension, "top_eigenvectors_sym: matrix is not square");
  const std::size_t n = a.rows();
  r = std::min(r, n);
  ECMap ma = as_matrix(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ma);
  // Eigenvalues come back ascending; rank by |eigenvalue|.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& vals = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::abs(vals[static_cast<Eigen::Index>(x)]) >
           std::abs(vals[static_cast<Eigen::Index>(y)]);
  });
  Tensor out(n, r);
  for (std::size_t c = 0; c < r; ++c)
    for (std::size_t i = 0; i < n; ++i)
      out.at(i, c) = es.eigenvectors()(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(order[c]));
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) fail(ErrorKind::kDimension, "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i) * b.at(i);
  return s;
}

}  // namespace reltask
