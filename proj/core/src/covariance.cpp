#include "batchlab/covariance.hpp"

#include <cmath>
#include <cstdint>

#include "batchlab/error.hpp"

namespace batchlab {

namespace {

constexpr std::uint64_t kEnumerationCap = 1000000;

void check_pop(const GradientPopulation& pop) {
  if (pop.per_sample.rank() != 2 || pop.per_sample.rows() == 0)
    throw DimensionError("covariance: population must be a nonempty [N x P] tensor");
}

// g g^T as a [P x P] tensor.
Tensor outer_self(const Tensor& g) {
  const std::size_t p = g.size();
  Tensor out = Tensor::zeros({p, p});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) out.at(i, j) = g[i] * g[j];
  return out;
}

// C(n, m) capped at kEnumerationCap + 1 to avoid overflow.
std::uint64_t binomial_capped(std::uint64_t n, std::uint64_t m) {
  if (m > n) return 0;
  if (m > n - m) m = n - m;
  std::uint64_t r = 1;
  for (std::uint64_t k = 1; k <= m; ++k) {
    // r * (n - m + k) / k is always integral at this point.
    if (r > (kEnumerationCap + 1) * k / (n - m + k)) return kEnumerationCap + 1;
    r = r * (n - m + k) / k;
  }
  return r;
}

std::uint64_t pow_capped(std::uint64_t base, std::uint64_t exp) {
  std::uint64_t r = 1;
  for (std::uint64_t k = 0; k < exp; ++k) {
    if (base != 0 && r > kEnumerationCap / base + 1) return kEnumerationCap + 1;
    r *= base;
  }
  return r;
}

// Accumulates weighted first and second moments of gradient estimates and
// finishes into a covariance matrix. Weights must sum to 1.
struct MomentAccumulator {
  explicit MomentAccumulator(std::size_t p)
      : first(Tensor::zeros({p})), second(Tensor::zeros({p, p})) {}

  // Only the upper triangle is accumulated and then mirrored, so the
  // result is symmetric bitwise, not merely within rounding.
  void add(const std::vector<double>& est, double weight) {
    const std::size_t p = first.size();
    for (std::size_t i = 0; i < p; ++i) {
      first[i] += weight * est[i];
      for (std::size_t j = i; j < p; ++j) second.at(i, j) += weight * est[i] * est[j];
    }
  }

  Tensor covariance() const {
    const std::size_t p = first.size();
    Tensor cov = Tensor::zeros({p, p});
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = i; j < p; ++j) {
        const double v = second.at(i, j) - first[i] * first[j];
        cov.at(i, j) = v;
        cov.at(j, i) = v;
      }
    }
    return cov;
  }

  Tensor first;
  Tensor second;
};

Tensor enumerate_selectors(const GradientPopulation& pop, std::size_t m, Tensor* mean_out) {
  const std::size_t n = pop.size(), p = pop.dim();
  if (n > 19 || (std::uint64_t(1) << n) > kEnumerationCap)
    throw SizeError("enumerate_cov: 2^N selector patterns exceed the enumeration cap");
  const double prob = static_cast<double>(m) / static_cast<double>(n);
  const double inv_m = 1.0 / static_cast<double>(m);

  MomentAccumulator acc(p);
  std::vector<double> est(p);
  const std::uint64_t total = std::uint64_t(1) << n;
  for (std::uint64_t bits = 0; bits < total; ++bits) {
    double weight = 1.0;
    for (std::size_t i = 0; i < p; ++i) est[i] = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      if (bits >> s & 1) {
        weight *= prob;
        const double* row = pop.per_sample.row(s);
        for (std::size_t i = 0; i < p; ++i) est[i] += row[i];
      } else {
        weight *= 1.0 - prob;
      }
    }
    for (std::size_t i = 0; i < p; ++i) est[i] *= inv_m;
    acc.add(est, weight);
  }
  if (mean_out) *mean_out = acc.first;
  return acc.covariance();
}

Tensor enumerate_iid(const GradientPopulation& pop, std::size_t m, Tensor* mean_out) {
  const std::size_t n = pop.size(), p = pop.dim();
  const std::uint64_t total = pow_capped(n, m);
  if (total > kEnumerationCap)
    throw SizeError("enumerate_cov: N^M ordered draws exceed the enumeration cap");
  const double weight = 1.0 / static_cast<double>(total);
  const double inv_m = 1.0 / static_cast<double>(m);

  MomentAccumulator acc(p);
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> est(p);
  for (std::uint64_t tuple = 0; tuple < total; ++tuple) {
    for (std::size_t i = 0; i < p; ++i) est[i] = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double* row = pop.per_sample.row(idx[k]);
      for (std::size_t i = 0; i < p; ++i) est[i] += row[i];
    }
    for (std::size_t i = 0; i < p; ++i) est[i] *= inv_m;
    acc.add(est, weight);
    // Odometer advance in base N, least significant digit first.
    for (std::size_t k = 0; k < m; ++k) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }
  if (mean_out) *mean_out = acc.first;
  return acc.covariance();
}

Tensor enumerate_subsets(const GradientPopulation& pop, std::size_t m, Tensor* mean_out) {
  const std::size_t n = pop.size(), p = pop.dim();
  const std::uint64_t total = binomial_capped(n, m);
  if (total > kEnumerationCap)
    throw SizeError("enumerate_cov: C(N,M) subsets exceed the enumeration cap");
  const double weight = 1.0 / static_cast<double>(total);
  const double inv_m = 1.0 / static_cast<double>(m);

  MomentAccumulator acc(p);
  std::vector<std::size_t> combo(m);
  for (std::size_t k = 0; k < m; ++k) combo[k] = k;
  std::vector<double> est(p);
  while (true) {
    for (std::size_t i = 0; i < p; ++i) est[i] = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double* row = pop.per_sample.row(combo[k]);
      for (std::size_t i = 0; i < p; ++i) est[i] += row[i];
    }
    for (std::size_t i = 0; i < p; ++i) est[i] *= inv_m;
    acc.add(est, weight);
    // Next lexicographic combination.
    std::size_t k = m;
    while (k > 0 && combo[k - 1] == n - m + k - 1) --k;
    if (k == 0) break;
    ++combo[k - 1];
    for (std::size_t j = k; j < m; ++j) combo[j] = combo[j - 1] + 1;
  }
  if (mean_out) *mean_out = acc.first;
  return acc.covariance();
}

}  // namespace

GradientPopulation GradientPopulation::make(Tensor per_sample) {
  if (per_sample.rank() != 2 || per_sample.rows() == 0)
    throw DimensionError("GradientPopulation: expected a nonempty [N x P] tensor");
  const std::size_t n = per_sample.rows(), p = per_sample.cols();
  GradientPopulation pop;
  pop.mean = Tensor::zeros({p});
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = per_sample.row(r);
    for (std::size_t j = 0; j < p; ++j) pop.mean[j] += row[j];
  }
  scale_in_place(pop.mean, 1.0 / static_cast<double>(n));
  pop.second_moment = matmul_ta(per_sample, per_sample);
  scale_in_place(pop.second_moment, 1.0 / static_cast<double>(n));
  pop.per_sample = std::move(per_sample);
  return pop;
}

const char* to_string(BatchModel model) {
  switch (model) {
    case BatchModel::independent_selectors:
      return "independent_selectors";
    case BatchModel::iid_draws:
      return "iid_draws";
    case BatchModel::subsets:
      return "subsets";
  }
  return "unknown";
}

Tensor cov_with_replacement(const GradientPopulation& pop, std::size_t m) {
  check_pop(pop);
  if (m < 1) throw ParameterError("cov_with_replacement: M must be >= 1");
  const double n = static_cast<double>(pop.size());
  return scale(pop.second_moment, 1.0 / static_cast<double>(m) - 1.0 / n);
}

Tensor cov_without_replacement(const GradientPopulation& pop, std::size_t m) {
  check_pop(pop);
  const std::size_t n = pop.size();
  if (n < 2) throw ParameterError("cov_without_replacement: needs N >= 2");
  if (m < 1 || m > n) throw ParameterError("cov_without_replacement: M must be in [1, N]");
  const double inv_nm1 = 1.0 / static_cast<double>(n - 1);
  Tensor out = scale(pop.second_moment, 1.0 / static_cast<double>(m) - inv_nm1);
  Tensor cross = outer_self(pop.mean);
  axpy(inv_nm1, cross, out);
  return out;
}

Tensor cov_cross_batch(const GradientPopulation& pop) {
  check_pop(pop);
  if (pop.size() < 2) throw ParameterError("cov_cross_batch: needs N >= 2");
  return scale(outer_self(pop.mean), 1.0 / static_cast<double>(pop.size() - 1));
}

Tensor enumerate_cov(const GradientPopulation& pop, std::size_t m, BatchModel model,
                     Tensor* mean_out) {
  check_pop(pop);
  if (m < 1) throw ParameterError("enumerate_cov: M must be >= 1");
  if (model != BatchModel::iid_draws && m > pop.size())
    throw ParameterError("enumerate_cov: M must not exceed N in this model");
  switch (model) {
    case BatchModel::independent_selectors:
      return enumerate_selectors(pop, m, mean_out);
    case BatchModel::iid_draws:
      return enumerate_iid(pop, m, mean_out);
    case BatchModel::subsets:
      return enumerate_subsets(pop, m, mean_out);
  }
  throw ParameterError("enumerate_cov: unknown batch model");
}

namespace {

// Draws one batch estimate into est. scratch holds M indices for subsets.
void draw_estimate(const GradientPopulation& pop, std::size_t m, BatchModel model,
                   double eta, double sigma, Rng& rng, std::vector<std::size_t>& scratch,
                   std::vector<double>& est) {
  const std::size_t n = pop.size(), p = pop.dim();
  const double prob = static_cast<double>(m) / static_cast<double>(n);
  for (std::size_t i = 0; i < p; ++i) est[i] = 0.0;
  auto accumulate = [&](std::size_t sample) {
    const double z = (sigma == 0.0) ? 1.0 : 1.0 + sigma * rng.normal();
    const double* row = pop.per_sample.row(sample);
    for (std::size_t i = 0; i < p; ++i) est[i] += z * row[i];
  };
  switch (model) {
    case BatchModel::independent_selectors:
      for (std::size_t s = 0; s < n; ++s)
        if (rng.next_double() < prob) accumulate(s);
      break;
    case BatchModel::iid_draws:
      for (std::size_t k = 0; k < m; ++k) accumulate(rng.next_below(n));
      break;
    case BatchModel::subsets: {
      // Floyd's sampling of M distinct indices; scratch holds the picks.
      scratch.clear();
      for (std::size_t j = n - m; j < n; ++j) {
        std::size_t t = static_cast<std::size_t>(rng.next_below(j + 1));
        bool seen = false;
        for (std::size_t v : scratch)
          if (v == t) { seen = true; break; }
        scratch.push_back(seen ? j : t);
      }
      for (std::size_t v : scratch) accumulate(v);
      break;
    }
  }
  const double factor = eta / static_cast<double>(m);
  for (std::size_t i = 0; i < p; ++i) est[i] *= factor;
}

McCov monte_carlo_impl(const GradientPopulation& pop, std::size_t m, double eta,
                       double sigma_sq, BatchModel model, std::size_t draws, Rng& rng) {
  check_pop(pop);
  if (m < 1) throw ParameterError("monte_carlo_cov: M must be >= 1");
  if (model != BatchModel::iid_draws && m > pop.size())
    throw ParameterError("monte_carlo_cov: M must not exceed N in this model");
  if (draws < 1000) throw ParameterError("monte_carlo_cov: needs at least 1000 draws");
  if (sigma_sq < 0.0) throw ParameterError("monte_carlo_cov: negative noise variance");
  const std::size_t p = pop.dim();
  const double sigma = std::sqrt(sigma_sq);

  Tensor samples = Tensor::zeros({draws, p});
  std::vector<std::size_t> scratch;
  std::vector<double> est(p);
  for (std::size_t d = 0; d < draws; ++d) {
    draw_estimate(pop, m, model, eta, sigma, rng, scratch, est);
    double* out = samples.row(d);
    for (std::size_t i = 0; i < p; ++i) out[i] = est[i];
  }

  // Shift by the first draw before accumulating: covariance is shift
  // invariant, conditioning improves, and a degenerate population (all
  // estimates bitwise equal) comes out exactly zero.
  const std::vector<double> ref(samples.row(0), samples.row(0) + p);
  std::vector<double> mean(p, 0.0);
  for (std::size_t d = 0; d < draws; ++d) {
    const double* row = samples.row(d);
    for (std::size_t i = 0; i < p; ++i) mean[i] += row[i] - ref[i];
  }
  for (std::size_t i = 0; i < p; ++i) mean[i] /= static_cast<double>(draws);

  McCov result;
  result.cov = Tensor::zeros({p, p});
  result.std_err = Tensor::zeros({p, p});
  result.draws = draws;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      double sum_y = 0.0, sum_y2 = 0.0;
      for (std::size_t d = 0; d < draws; ++d) {
        const double* row = samples.row(d);
        const double y = (row[i] - ref[i] - mean[i]) * (row[j] - ref[j] - mean[j]);
        sum_y += y;
        sum_y2 += y * y;
      }
      const double dd = static_cast<double>(draws);
      const double ybar = sum_y / dd;
      const double cov = sum_y / (dd - 1.0);
      const double var_y = sum_y2 / dd - ybar * ybar;
      const double se = std::sqrt(var_y > 0.0 ? var_y / (dd - 1.0) : 0.0);
      result.cov.at(i, j) = cov;
      result.cov.at(j, i) = cov;
      result.std_err.at(i, j) = se;
      result.std_err.at(j, i) = se;
    }
  }
  return result;
}

}  // namespace

McCov monte_carlo_cov(const GradientPopulation& pop, std::size_t m, BatchModel model,
                      std::size_t draws, Rng& rng) {
  return monte_carlo_impl(pop, m, 1.0, 0.0, model, draws, rng);
}

McCov monte_carlo_update_cov(const GradientPopulation& pop, std::size_t m, double eta,
                             const NoiseConfig& noise, BatchModel model,
                             std::size_t draws, Rng& rng) {
  if (!(eta > 0.0)) throw ParameterError("monte_carlo_update_cov: eta must be positive");
  return monte_carlo_impl(pop, m, eta, noise.sigma_sq, model, draws, rng);
}

UpdateCovariance update_covariance(const GradientPopulation& pop, std::size_t m,
                                   double eta) {
  check_pop(pop);
  if (m < 1) throw ParameterError("update_covariance: M must be >= 1");
  if (!(eta > 0.0)) throw ParameterError("update_covariance: eta must be positive");
  UpdateCovariance out;
  out.closed_form = scale(cov_with_replacement(pop, m), eta * eta);
  out.approximation =
      scale(pop.second_moment, eta * eta / static_cast<double>(m));
  out.rel_error_bound = static_cast<double>(m) / static_cast<double>(pop.size());
  return out;
}

Tensor logistic_gradient_population(const Tensor& inputs, const std::vector<int>& labels,
                                    const Tensor& w) {
  if (inputs.rank() != 2 || inputs.rows() == 0)
    throw DimensionError("logistic_gradient_population: expected [N x d] inputs");
  if (labels.size() != inputs.rows())
    throw DimensionError("logistic_gradient_population: label count mismatch");
  if (w.size() != inputs.cols())
    throw DimensionError("logistic_gradient_population: weight dimension mismatch");
  const std::size_t n = inputs.rows(), d = inputs.cols();
  Tensor grads = Tensor::zeros({n, d});
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] != 1 && labels[r] != -1)
      throw ParameterError("logistic_gradient_population: labels must be +/-1");
    const double y = static_cast<double>(labels[r]);
    const double* x = inputs.row(r);
    double margin = 0.0;
    for (std::size_t j = 0; j < d; ++j) margin += w[j] * x[j];
    const double s = 1.0 / (1.0 + std::exp(y * margin));  // sigmoid(-y <w,x>)
    double* g = grads.row(r);
    for (std::size_t j = 0; j < d; ++j) g[j] = -y * s * x[j];
  }
  return grads;
}

}  // namespace batchlab
