#pragma once

#include <cstddef>
#include <vector>

#include "batchlab/optimizer.hpp"
#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

// A population of per-sample gradients together with its exact first and
// second moments: g = column mean, C = (1/N) sum_n g_n g_n^T.
struct GradientPopulation {
  Tensor per_sample;     // [N x P]
  Tensor mean;           // [P]
  Tensor second_moment;  // [P x P], symmetric PSD by construction

  static GradientPopulation make(Tensor per_sample);

  std::size_t size() const { return per_sample.rows(); }
  std::size_t dim() const { return per_sample.cols(); }
};

// How a mini-batch of nominal size M is drawn from the N samples.
//
//  independent_selectors: every sample enters the batch independently with
//    probability M/N, so the realized batch size fluctuates around M. This
//    is the model under which the with-replacement closed form below is
//    exact for every population.
//  iid_draws: M ordered draws, uniform with replacement. Covariance is
//    (C - g g^T)/M.
//  subsets: a uniformly random M-subset, i.e. sampling without replacement
//    within one batch. Covariance is (N-M)/(M(N-1)) * (C - g g^T).
enum class BatchModel { independent_selectors, iid_draws, subsets };

const char* to_string(BatchModel model);

// Batch-mean gradient covariance under independent selectors:
// (1/M - 1/N) C. Requires M >= 1.
Tensor cov_with_replacement(const GradientPopulation& pop, std::size_t m);

// The without-replacement covariance in its usual printed form:
// (1/M - 1/(N-1)) C + g g^T/(N-1). Requires 1 <= M <= N, N >= 2.
//
// Note this is not the exact hypergeometric result (the pair-inclusion
// probability it encodes is M/(N-1) instead of (M-1)/(N-1)); enumerate_cov
// with BatchModel::subsets is the exact oracle to compare against. The two
// agree to O(M/N) relative in the M << N regime.
Tensor cov_without_replacement(const GradientPopulation& pop, std::size_t m);

// Covariance between the gradient estimates of two batches of the same
// epoch as usually printed: g g^T/(N-1). Requires N >= 2.
Tensor cov_cross_batch(const GradientPopulation& pop);

// Exact covariance of the batch-mean gradient, by enumerating every batch
// the model can produce (2^N selector patterns, N^M ordered draws, or
// C(N,M) subsets). Guarded at ~1e6 configurations; beyond that -> SizeError.
// If mean_out is non-null it receives the enumeration mean of the estimate,
// which must equal the population mean up to rounding in every model.
Tensor enumerate_cov(const GradientPopulation& pop, std::size_t m, BatchModel model,
                     Tensor* mean_out = nullptr);

struct McCov {
  Tensor cov;      // [P x P] sample covariance of the batch-mean gradient
  Tensor std_err;  // [P x P] per-entry standard error of that estimate
  std::size_t draws = 0;
};

// Sample covariance over `draws` independent batches. draws >= 1000.
McCov monte_carlo_cov(const GradientPopulation& pop, std::size_t m, BatchModel model,
                      std::size_t draws, Rng& rng);

// Sample covariance of the weight update eta * (1/M) sum_{n in B} z_n g_n,
// where z_n ~ N(1, sigma^2) is drawn per selected sample (noise.sigma_sq = 0
// means z_n == 1 with no random draw). This is the estimator used to check
// that sqrt-scaled learning rates and matched multiplicative noise reproduce
// small-batch update statistics.
McCov monte_carlo_update_cov(const GradientPopulation& pop, std::size_t m, double eta,
                             const NoiseConfig& noise, BatchModel model,
                             std::size_t draws, Rng& rng);

struct UpdateCovariance {
  Tensor closed_form;    // eta^2 (1/M - 1/N) C
  Tensor approximation;  // (eta^2/M) C
  double rel_error_bound = 0.0;  // M/N, the scale of the dropped 1/N term
};

// Covariance of the SGD update eta * batch-mean gradient: the closed form
// under independent selectors and the (eta^2/M) C approximation it is
// usually quoted as, which drops the 1/N term.
UpdateCovariance update_covariance(const GradientPopulation& pop, std::size_t m,
                                   double eta);

// Per-sample logistic-loss gradients at w: row n is
// -y_n sigmoid(-y_n <w, x_n>) x_n for labels y_n in {-1, +1}. Supplies a
// covariance population backed by a real model rather than synthetic draws.
Tensor logistic_gradient_population(const Tensor& inputs, const std::vector<int>& labels,
                                    const Tensor& w);

}  // namespace batchlab
