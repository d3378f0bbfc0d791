#include "batchlab/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "batchlab/error.hpp"
#include "batchlab/parallel.hpp"

namespace batchlab {

namespace {

std::atomic<bool> g_debug_checks{false};

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}

void check_result(const Tensor& t, const char* context) {
  if (debug_finite_checks()) require_finite(t, context);
}

void require_matrix(const Tensor& t, const char* context) {
  if (t.rank() != 2) throw DimensionError(std::string(context) + ": expected a rank-2 tensor");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size())
    throw DimensionError("tensor data length does not match shape");
  require_finite(*this, "Tensor()");
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  Tensor t;
  std::size_t n = shape_product(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(n, 0.0);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  if (!std::isfinite(value)) throw NumericError("Tensor::full: non-finite fill value");
  Tensor t;
  std::size_t n = shape_product(shape);
  t.shape_ = std::move(shape);
  t.data_.assign(n, value);
  return t;
}

void set_debug_finite_checks(bool enabled) { g_debug_checks.store(enabled); }
bool debug_finite_checks() { return g_debug_checks.load(std::memory_order_relaxed); }

void require_finite(const Tensor& t, const char* context) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%s: non-finite entry at flat index %zu", context, i);
      throw NumericError(buf);
    }
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions disagree");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::zeros({m, n});
  parallel_for(0, static_cast<std::int64_t>(m), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      double* ci = c.row(static_cast<std::size_t>(i));
      const double* ai = a.row(static_cast<std::size_t>(i));
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = ai[kk];
        const double* bk = b.row(kk);
        for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
      }
    }
  });
  check_result(c, "matmul");
  return c;
}

Tensor matmul_ta(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_ta");
  require_matrix(b, "matmul_ta");
  if (a.rows() != b.rows()) throw DimensionError("matmul_ta: contraction dimensions disagree");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  Tensor c = Tensor::zeros({m, n});
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* ak = a.row(kk);
    const double* bk = b.row(kk);
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = c.row(i);
      const double aki = ak[i];
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  check_result(c, "matmul_ta");
  return c;
}

Tensor matmul_tb(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tb");
  require_matrix(b, "matmul_tb");
  if (a.cols() != b.cols()) throw DimensionError("matmul_tb: contraction dimensions disagree");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor c = Tensor::zeros({m, n});
  parallel_for(0, static_cast<std::int64_t>(m), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      const double* ai = a.row(static_cast<std::size_t>(i));
      double* ci = c.row(static_cast<std::size_t>(i));
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b.row(j);
        double acc = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
        ci[j] = acc;
      }
    }
  });
  check_result(c, "matmul_tb");
  return c;
}

double l2_norm(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += v[i] * v[i];
  return std::sqrt(acc);
}

double l2_norm(const Tensor& t) { return l2_norm(t.data(), t.size()); }

double dot(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("dot: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const Tensor& t) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) acc += t[i];
  return acc;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("add: shape mismatch");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  check_result(c, "add");
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw DimensionError("sub: shape mismatch");
  Tensor c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  check_result(c, "sub");
  return c;
}

Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  scale_in_place(out, c);
  return out;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
  if (!x.same_shape(y)) throw DimensionError("axpy: shape mismatch");
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
  check_result(y, "axpy");
}

void scale_in_place(Tensor& t, double c) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] *= c;
  check_result(t, "scale");
}

}  // namespace batchlab
