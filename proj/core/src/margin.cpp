#include "batchlab/margin.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "batchlab/error.hpp"
#include "batchlab/fit.hpp"

namespace batchlab {

namespace {

void validate_dataset(const SeparableDataset& data) {
  if (data.inputs.rank() != 2) throw DimensionError("margin: inputs must be N x d");
  if (data.labels.size() != data.inputs.rows())
    throw DimensionError("margin: labels length must match inputs");
  for (int y : data.labels)
    if (y != 1 && y != -1) throw ParameterError("margin: labels must be -1 or +1");
}

// Gaussian elimination with partial pivoting on a k x k system, k <= 3.
// Returns false on (near-)singular input.
bool solve_small(double a[3][3], double b[3], std::size_t k, double x[3]) {
  std::size_t idx[3] = {0, 1, 2};
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(a[idx[r]][col]) > std::abs(a[idx[piv]][col])) piv = r;
    std::swap(idx[col], idx[piv]);
    const double diag = a[idx[col]][col];
    if (std::abs(diag) < 1e-12) return false;
    for (std::size_t r = col + 1; r < k; ++r) {
      const double f = a[idx[r]][col] / diag;
      for (std::size_t c = col; c < k; ++c) a[idx[r]][c] -= f * a[idx[col]][c];
      b[idx[r]] -= f * b[idx[col]];
    }
  }
  for (std::size_t col = k; col-- > 0;) {
    double s = b[idx[col]];
    for (std::size_t c = col + 1; c < k; ++c) s -= a[idx[col]][c] * x[c];
    x[col] = s / a[idx[col]][col];
  }
  return true;
}

}  // namespace

double margin_of(const SeparableDataset& data, const Tensor& u) {
  validate_dataset(data);
  const std::size_t dim = data.inputs.cols();
  if (u.size() != dim) throw DimensionError("margin_of: direction length");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < data.labels.size(); ++n) {
    const double* x = data.inputs.row(n);
    double z = 0.0;
    for (std::size_t j = 0; j < dim; ++j) z += u[j] * x[j];
    m = std::min(m, static_cast<double>(data.labels[n]) * z);
  }
  return m;
}

MaxMargin max_margin_oracle(const SeparableDataset& data) {
  validate_dataset(data);
  const std::size_t n = data.labels.size(), d = data.inputs.cols();
  if (d != 2 && d != 3)
    throw DimensionError("max_margin_oracle: supports d = 2 or 3 only");
  if (n == 0 || n > 50)
    throw SizeError("max_margin_oracle: supports 1..50 points");

  // Signed points s_n = y_n x_n; the separator satisfies <w, s_n> >= 1 with
  // equality on the support set and w in its span.
  std::vector<double> s(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      s[i * d + j] = data.labels[i] * data.inputs.at(i, j);

  double best_norm2 = std::numeric_limits<double>::infinity();
  std::vector<double> best_w;

  std::size_t support[3];
  auto try_support = [&](std::size_t k) {
    double g[3][3], rhs[3], alpha[3];
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < d; ++c)
          dot += s[support[i] * d + c] * s[support[j] * d + c];
        g[i][j] = dot;
      }
      rhs[i] = 1.0;
    }
    if (!solve_small(g, rhs, k, alpha)) return;
    for (std::size_t i = 0; i < k; ++i)
      if (alpha[i] < -1e-10) return;

    std::vector<double> w(d, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t c = 0; c < d; ++c) w[c] += alpha[i] * s[support[i] * d + c];
    double norm2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) norm2 += w[c] * w[c];
    if (!(norm2 > 0.0) || norm2 >= best_norm2) return;

    for (std::size_t p = 0; p < n; ++p) {
      double z = 0.0;
      for (std::size_t c = 0; c < d; ++c) z += w[c] * s[p * d + c];
      if (z < 1.0 - 1e-9) return;
    }
    best_norm2 = norm2;
    best_w = std::move(w);
  };

  for (std::size_t i = 0; i < n; ++i) {
    support[0] = i;
    try_support(1);
    for (std::size_t j = i + 1; j < n; ++j) {
      support[1] = j;
      try_support(2);
      if (d == 3)
        for (std::size_t l = j + 1; l < n; ++l) {
          support[2] = l;
          try_support(3);
        }
    }
  }
  if (best_w.empty())
    throw InfeasibleError("max_margin_oracle: no separator through the origin");

  const double norm = std::sqrt(best_norm2);
  MaxMargin result;
  result.w_hat = Tensor::zeros({d});
  for (std::size_t c = 0; c < d; ++c) result.w_hat[c] = best_w[c] / norm;
  result.margin = margin_of(data, result.w_hat);
  return result;
}

MarginTrace run_margin_experiment(const SeparableDataset& data, double lr,
                                  std::uint64_t t_max, std::size_t checkpoints) {
  validate_dataset(data);
  if (!(lr > 0.0)) throw ParameterError("run_margin_experiment: lr must be > 0");
  if (t_max < 1) throw ParameterError("run_margin_experiment: t_max must be >= 1");
  if (checkpoints < 2)
    throw ParameterError("run_margin_experiment: needs >= 2 checkpoints");

  MarginTrace trace;
  const MaxMargin oracle = max_margin_oracle(data);
  trace.w_hat = oracle.w_hat;
  trace.oracle_margin = oracle.margin;

  const std::size_t n = data.labels.size(), d = data.inputs.cols();
  const std::vector<std::uint64_t> cks = log_spaced_times(t_max, checkpoints);
  std::vector<double> w(d, 0.0), grad(d);
  std::size_t next = 0;
  for (std::uint64_t t = 1; t <= t_max; ++t) {
    for (std::size_t c = 0; c < d; ++c) grad[c] = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* x = data.inputs.row(i);
      const double y = data.labels[i];
      double z = 0.0;
      for (std::size_t c = 0; c < d; ++c) z += w[c] * x[c];
      z *= y;
      // Stable logistic pieces: sigma(-z) and log(1 + exp(-z)).
      double sig, nll;
      if (z >= 0.0) {
        const double e = std::exp(-z);
        sig = e / (1.0 + e);
        nll = std::log1p(e);
      } else {
        const double e = std::exp(z);
        sig = 1.0 / (1.0 + e);
        nll = -z + std::log1p(e);
      }
      loss += nll;
      const double f = -y * sig;
      for (std::size_t c = 0; c < d; ++c) grad[c] += f * x[c];
    }
    loss /= static_cast<double>(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t c = 0; c < d; ++c) w[c] -= lr * inv_n * grad[c];

    if (next < cks.size() && t == cks[next]) {
      double norm2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) norm2 += w[c] * w[c];
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(loss) || !std::isfinite(norm))
        throw NumericError("run_margin_experiment: diverged");
      MarginEntry e;
      e.t = t;
      e.norm = norm;
      if (norm > 0.0) {
        Tensor unit = Tensor::zeros({d});
        for (std::size_t c = 0; c < d; ++c) unit[c] = w[c] / norm;
        double cos = 0.0;
        for (std::size_t c = 0; c < d; ++c) cos += unit[c] * trace.w_hat[c];
        e.cosine = cos;
        e.margin = margin_of(data, unit);
      }
      trace.entries.push_back(e);
      ++next;
    }
  }
  return trace;
}

void save_margin_csv(const MarginTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_margin_csv: cannot open " + path);
  out << "t,norm,cosine,margin\n";
  char buf[32];
  for (const MarginEntry& e : trace.entries) {
    out << e.t << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.norm);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.cosine);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.margin);
    out << buf << "\n";
  }
  if (!out) throw IoError("save_margin_csv: write failed for " + path);
}

}  // namespace batchlab
