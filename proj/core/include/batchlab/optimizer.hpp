#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

// Momentum SGD with optional global-norm gradient clipping.
//
// Update rule per step, given gradient g of the mean loss:
//   if clip_norm and |g| > clip_norm:  g <- g * clip_norm / |g|
//   v <- momentum * v + g
//   w <- w - lr * v
// A non-finite gradient refuses the step (state untouched) and throws.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum, std::size_t param_count,
              std::optional<double> clip_norm = std::nullopt);

  void step(Tensor& params, const Tensor& grad);

  double lr() const { return lr_; }
  void set_lr(double lr);
  double momentum() const { return momentum_; }
  const std::optional<double>& clip_norm() const { return clip_norm_; }
  void set_clip_norm(std::optional<double> clip);
  const Tensor& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  std::optional<double> clip_norm_;
  Tensor velocity_;
};

// Large-batch learning rate eta_L = eta_S * sqrt(|B_L| / |B_S|).
double sqrt_lr_scale(double base_lr, std::size_t base_batch, std::size_t large_batch);

// Comparison rule: eta_L = eta_S * |B_L| / |B_S|. Not the default anywhere.
double linear_lr_scale(double base_lr, std::size_t base_batch, std::size_t large_batch);

// Per-sample multiplicative gradient noise z_n ~ N(1, sigma_sq).
struct NoiseConfig {
  double sigma_sq = 0.0;
};

// sigma_sq = |B_L|/|B_S| - 1, chosen so (1 + sigma_sq)/|B_L| = 1/|B_S|:
// the large-batch update covariance scale matches the small batch's.
NoiseConfig match_small_batch_noise(std::size_t base_batch, std::size_t large_batch);

// Mean over rows of z_n * g_n with scalar z_n ~ N(1, sigma_sq) per row.
// per_sample is [M x P]; the result is the noisy mini-batch gradient [P].
// sigma_sq == 0 reduces exactly to the plain row mean.
Tensor noisy_gradient(const Tensor& per_sample, const NoiseConfig& noise, Rng& rng);

// Piecewise-constant learning-rate schedule in units of epochs.
struct Phase {
  std::size_t epochs = 0;
  double multiplier = 1.0;
};
struct Regime {
  std::vector<Phase> phases;
  double base_lr = 0.1;
  std::size_t base_batch = 64;
};

// Validates spans positive, multipliers positive and non-increasing.
Regime make_regime(std::vector<Phase> phases, double base_lr, std::size_t base_batch);

// Stretch every phase span by |B_L|/|B_S| (rounded up), preserving the
// iteration count per phase when the batch sizes divide the sample count.
Regime regime_adapt(const Regime& regime, std::size_t large_batch);

// Learning rate governing iteration t (0-based), given the number of
// iterations in one epoch. Past the last phase, its multiplier holds.
double lr_at(const Regime& regime, std::size_t iteration, std::size_t iters_per_epoch);

// Total epochs across all phases.
std::size_t regime_epochs(const Regime& regime);

}  // namespace batchlab
