#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "reltask/error.hpp"
#include "reltask/rng.hpp"

namespace reltask {

// Dense row-major tensor of 64-bit floats. Rank 1 and 2 cover everything in
// this project; batched attention flattens (batch, k) onto the row axis.
// Kernel quantities are ill-conditioned, so everything stays in doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : Tensor(std::vector<std::size_t>{rows, cols}, fill) {}

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);
  static Tensor identity(std::size_t n);
  static Tensor gaussian(std::vector<std::size_t> shape, double stddev,
                         Rng& rng);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const {
    return data_[i * cols() + j];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double sum() const;
  double max_abs() const;
  double frobenius_norm() const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scalar);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double s);

// C = op(A) * op(B) with optional transposes.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);
Tensor transpose(const Tensor& m);

// Row-stabilized softmax applied to each row of a 2-D tensor.
Tensor softmax_rows(const Tensor& m);

// Solves a x = b for SPD a via Cholesky. b may be a vector or a matrix of
// right-hand sides. Throws ErrorKind::kSingular naming the failing pivot.
Tensor solve_spd(const Tensor& a, const Tensor& b);

// sigma_max / sigma_min via SVD; +infinity when sigma_min < 1e-14 sigma_max.
double condition_number(const Tensor& a);

// Singular values of a, descending.
std::vector<double> singular_values(const Tensor& a);

double determinant(const Tensor& a);

// General (possibly nonsymmetric) square solve; small systems only.
Tensor solve_general(const Tensor& a, const Tensor& b);

// Top-r eigenvectors (columns, orthonormal) of a symmetric matrix, by
// descending |eigenvalue|.
Tensor top_eigenvectors_sym(const Tensor& a, std::size_t r);

double dot(const Tensor& a, const Tensor& b);

}  // namespace reltask
