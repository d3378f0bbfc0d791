#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace batchlab {

// Dense row-major tensor of 64-bit floats. The carrier for parameters,
// gradients and activations everywhere in this library.
//
// Entries must be finite: constructors that accept data reject NaN/Inf, and
// with set_debug_finite_checks(true) every arithmetic result is re-scanned.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }

  // 2-d helpers
  std::size_t rows() const { return shape_[0]; }
  std::size_t cols() const { return shape_[1]; }
  double* row(std::size_t i) { return data_.data() + i * shape_[1]; }
  const double* row(std::size_t i) const { return data_.data() + i * shape_[1]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// When enabled, every operation below validates that its result is finite
// and throws NumericError otherwise. Off by default (construction still
// validates caller-supplied data).
void set_debug_finite_checks(bool enabled);
bool debug_finite_checks();

// Throws NumericError if any entry of t is NaN or Inf.
void require_finite(const Tensor& t, const char* context);

// C[i][j] = sum_k A[i][k] * B[k][j], accumulated in ascending k so the
// result is bitwise reproducible. Throws DimensionError on mismatch.
Tensor matmul(const Tensor& a, const Tensor& b);

// A^T * B and A * B^T without materializing the transpose. The contraction
// index ascends, as in matmul.
Tensor matmul_ta(const Tensor& a, const Tensor& b);
Tensor matmul_tb(const Tensor& a, const Tensor& b);

// sqrt(sum t_i^2) with fixed ascending summation.
double l2_norm(const Tensor& t);
double l2_norm(const double* v, std::size_t n);

double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& t);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// y += alpha * x
void axpy(double alpha, const Tensor& x, Tensor& y);
void scale_in_place(Tensor& t, double c);

}  // namespace batchlab
