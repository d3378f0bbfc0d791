#include "batchlab/batchnorm.hpp"

#include <algorithm>
#include <cmath>

#include "batchlab/error.hpp"

namespace batchlab {

namespace {

void check_width(const BnState& st, const Tensor& x, const char* who) {
  if (x.rank() != 2 || x.cols() != st.d) throw DimensionError(std::string(who) + ": width mismatch");
  if (x.rows() == 0) throw DimensionError(std::string(who) + ": empty batch");
}

// mean and std (biased variance + epsilon) of rows [r0, r1) per feature.
void slice_stats(const Tensor& x, std::size_t r0, std::size_t r1, double epsilon, double* mu,
                 double* sigma) {
  const std::size_t d = x.cols();
  const double m = static_cast<double>(r1 - r0);
  for (std::size_t j = 0; j < d; ++j) mu[j] = 0.0;
  for (std::size_t i = r0; i < r1; ++i) {
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) mu[j] += xi[j];
  }
  for (std::size_t j = 0; j < d; ++j) mu[j] /= m;
  for (std::size_t j = 0; j < d; ++j) sigma[j] = 0.0;
  for (std::size_t i = r0; i < r1; ++i) {
    const double* xi = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = xi[j] - mu[j];
      sigma[j] += dev * dev;
    }
  }
  for (std::size_t j = 0; j < d; ++j) sigma[j] = std::sqrt(sigma[j] / m + epsilon);
}

void ema_update(BnState& st, const double* mu, const double* sigma) {
  const double keep = 1.0 - st.momentum;
  for (std::size_t j = 0; j < st.d; ++j) {
    st.mu_run[j] = keep * st.mu_run[j] + st.momentum * mu[j];
    const double s = st.variance_space ? sigma[j] * sigma[j] : sigma[j];
    st.sigma_run[j] = keep * st.sigma_run[j] + st.momentum * s;
  }
  st.initialized = true;
}

}  // namespace

BnState BnState::make(std::size_t d, std::size_t ghost, double momentum, double epsilon,
                      bool variance_space) {
  if (d == 0) throw ParameterError("bn: zero width");
  if (momentum <= 0.0 || momentum >= 1.0) throw ParameterError("bn: momentum must be in (0,1)");
  if (epsilon < 0.0) throw ParameterError("bn: negative epsilon");
  BnState st;
  st.d = d;
  st.ghost = ghost;
  st.momentum = momentum;
  st.epsilon = epsilon;
  st.variance_space = variance_space;
  st.mu_run = Tensor::zeros({d});
  st.sigma_run = Tensor::full({d}, 1.0);
  return st;
}

Tensor bn_train_forward(BnState& st, const double* gamma, const double* beta, const Tensor& x,
                        BnCache* cache, bool update_stats) {
  check_width(st, x, "bn_train_forward");
  const std::size_t m = x.rows(), d = st.d;
  std::vector<double> mu(d), sigma(d);
  slice_stats(x, 0, m, st.epsilon, mu.data(), sigma.data());

  Tensor y = Tensor::zeros({m, d});
  Tensor xhat = Tensor::zeros({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    double* hi = xhat.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      hi[j] = (xi[j] - mu[j]) / sigma[j];
      yi[j] = gamma[j] * hi[j] + beta[j];
    }
  }
  if (update_stats) ema_update(st, mu.data(), sigma.data());
  if (cache) {
    cache->slice_begin = {0, m};
    cache->xhat = std::move(xhat);
    cache->sigma = Tensor({1, d}, std::move(sigma));
  }
  return y;
}

Tensor gbn_train_forward(BnState& st, const double* gamma, const double* beta, const Tensor& x,
                         BnCache* cache, bool update_stats) {
  check_width(st, x, "gbn_train_forward");
  if (st.ghost == 0) throw ParameterError("gbn: ghost size not set");
  const std::size_t m = x.rows(), d = st.d;
  const std::size_t n_slices = (m + st.ghost - 1) / st.ghost;

  Tensor y = Tensor::zeros({m, d});
  Tensor xhat = Tensor::zeros({m, d});
  Tensor sigmas = Tensor::zeros({n_slices, d});
  std::vector<std::size_t> begins(n_slices + 1);
  std::vector<double> mu(d);

  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::size_t r0 = s * st.ghost;
    const std::size_t r1 = std::min(m, r0 + st.ghost);
    begins[s] = r0;
    double* sig = sigmas.row(s);
    slice_stats(x, r0, r1, st.epsilon, mu.data(), sig);
    for (std::size_t i = r0; i < r1; ++i) {
      const double* xi = x.row(i);
      double* yi = y.row(i);
      double* hi = xhat.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        hi[j] = (xi[j] - mu[j]) / sig[j];
        yi[j] = gamma[j] * hi[j] + beta[j];
      }
    }
    if (update_stats) ema_update(st, mu.data(), sig);
  }
  begins[n_slices] = m;

  if (cache) {
    cache->slice_begin = std::move(begins);
    cache->xhat = std::move(xhat);
    cache->sigma = std::move(sigmas);
  }
  return y;
}

Tensor bn_eval_forward(const BnState& st, const double* gamma, const double* beta,
                       const Tensor& x) {
  check_width(st, x, "bn_eval_forward");
  if (!st.initialized)
    throw StateError("bn: eval requested before any training step initialized running stats");
  const std::size_t m = x.rows(), d = st.d;
  std::vector<double> denom(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double s = st.variance_space ? std::sqrt(st.sigma_run[j]) : st.sigma_run[j];
    if (!(s > 0.0)) throw NumericError("bn: non-positive running std");
    denom[j] = s;
  }
  Tensor y = Tensor::zeros({m, d});
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.row(i);
    double* yi = y.row(i);
    for (std::size_t j = 0; j < d; ++j)
      yi[j] = gamma[j] * (xi[j] - st.mu_run[j]) / denom[j] + beta[j];
  }
  return y;
}

Tensor bn_backward(const BnState& st, const BnCache& cache, const double* gamma,
                   const Tensor& dy, double* dgamma, double* dbeta) {
  const std::size_t m = dy.rows(), d = st.d;
  if (!cache.xhat.same_shape(dy)) throw StateError("bn_backward: cache does not match dy");
  const std::size_t n_slices = cache.slice_begin.size() - 1;

  Tensor dx = Tensor::zeros({m, d});
  std::vector<double> mean_dh(d), mean_dhh(d);
  for (std::size_t s = 0; s < n_slices; ++s) {
    const std::size_t r0 = cache.slice_begin[s];
    const std::size_t r1 = cache.slice_begin[s + 1];
    const double inv_m = 1.0 / static_cast<double>(r1 - r0);
    const double* sig = cache.sigma.row(s);

    for (std::size_t j = 0; j < d; ++j) mean_dh[j] = mean_dhh[j] = 0.0;
    for (std::size_t i = r0; i < r1; ++i) {
      const double* dyi = dy.row(i);
      const double* hi = cache.xhat.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        dgamma[j] += dyi[j] * hi[j];
        dbeta[j] += dyi[j];
        const double dh = dyi[j] * gamma[j];
        mean_dh[j] += dh;
        mean_dhh[j] += dh * hi[j];
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      mean_dh[j] *= inv_m;
      mean_dhh[j] *= inv_m;
    }
    // dx = (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat)) / sigma,
    // the exact gradient through the per-slice mean and biased std.
    for (std::size_t i = r0; i < r1; ++i) {
      const double* dyi = dy.row(i);
      const double* hi = cache.xhat.row(i);
      double* dxi = dx.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        const double dh = dyi[j] * gamma[j];
        dxi[j] = (dh - mean_dh[j] - hi[j] * mean_dhh[j]) / sig[j];
      }
    }
  }
  return dx;
}

}  // namespace batchlab
