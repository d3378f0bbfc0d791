#include "batchlab/optimizer.hpp"

#include <cmath>
#include <limits>

#include "batchlab/error.hpp"

namespace batchlab {

SgdMomentum::SgdMomentum(double lr, double momentum, std::size_t param_count,
                         std::optional<double> clip_norm)
    : lr_(lr), momentum_(momentum), clip_norm_(clip_norm) {
  if (!(lr > 0.0)) throw ParameterError("sgd: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ParameterError("sgd: momentum must be in [0,1)");
  if (clip_norm_ && !(*clip_norm_ > 0.0))
    throw ParameterError("sgd: clip norm must be positive");
  if (param_count == 0) throw ParameterError("sgd: empty parameter vector");
  velocity_ = Tensor::zeros({param_count});
}

void SgdMomentum::set_lr(double lr) {
  if (!(lr > 0.0)) throw ParameterError("sgd: learning rate must be positive");
  lr_ = lr;
}

void SgdMomentum::set_clip_norm(std::optional<double> clip) {
  if (clip && !(*clip > 0.0)) throw ParameterError("sgd: clip norm must be positive");
  clip_norm_ = clip;
}

void SgdMomentum::step(Tensor& params, const Tensor& grad) {
  if (!params.same_shape(velocity_) || !grad.same_shape(velocity_))
    throw DimensionError("sgd: parameter/gradient shape mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw NumericError("sgd: non-finite gradient, step refused");

  double scale = 1.0;
  if (clip_norm_) {
    const double norm = l2_norm(grad);
    if (norm > *clip_norm_) scale = *clip_norm_ / norm;
  }
  for (std::size_t i = 0; i < grad.size(); ++i) {
    velocity_[i] = momentum_ * velocity_[i] + scale * grad[i];
    params[i] -= lr_ * velocity_[i];
  }
}

double sqrt_lr_scale(double base_lr, std::size_t base_batch, std::size_t large_batch) {
  if (base_batch == 0 || large_batch == 0) throw ParameterError("lr scale: zero batch size");
  return base_lr * std::sqrt(static_cast<double>(large_batch) / static_cast<double>(base_batch));
}

double linear_lr_scale(double base_lr, std::size_t base_batch, std::size_t large_batch) {
  if (base_batch == 0 || large_batch == 0) throw ParameterError("lr scale: zero batch size");
  return base_lr * (static_cast<double>(large_batch) / static_cast<double>(base_batch));
}

NoiseConfig match_small_batch_noise(std::size_t base_batch, std::size_t large_batch) {
  if (base_batch == 0) throw ParameterError("noise: zero base batch");
  if (large_batch < base_batch)
    throw ParameterError("noise: large batch smaller than base batch");
  NoiseConfig cfg;
  cfg.sigma_sq = static_cast<double>(large_batch) / static_cast<double>(base_batch) - 1.0;
  return cfg;
}

Tensor noisy_gradient(const Tensor& per_sample, const NoiseConfig& noise, Rng& rng) {
  if (per_sample.rank() != 2 || per_sample.rows() == 0)
    throw DimensionError("noisy_gradient: expected [M x P] per-sample gradients");
  if (noise.sigma_sq < 0.0) throw ParameterError("noisy_gradient: negative variance");
  const std::size_t m = per_sample.rows(), p = per_sample.cols();
  const double sigma = std::sqrt(noise.sigma_sq);

  Tensor out = Tensor::zeros({p});
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t n = 0; n < m; ++n) {
    const double z = (noise.sigma_sq == 0.0) ? 1.0 : 1.0 + sigma * rng.normal();
    const double* gn = per_sample.row(n);
    for (std::size_t j = 0; j < p; ++j) out[j] += z * gn[j];
  }
  for (std::size_t j = 0; j < p; ++j) out[j] *= inv_m;
  return out;
}

Regime make_regime(std::vector<Phase> phases, double base_lr, std::size_t base_batch) {
  if (phases.empty()) throw ParameterError("regime: no phases");
  if (!(base_lr > 0.0)) throw ParameterError("regime: base lr must be positive");
  if (base_batch == 0) throw ParameterError("regime: zero base batch");
  double prev = std::numeric_limits<double>::infinity();
  for (const Phase& ph : phases) {
    if (ph.epochs == 0) throw ParameterError("regime: phase span must be positive");
    if (!(ph.multiplier > 0.0)) throw ParameterError("regime: multiplier must be positive");
    if (ph.multiplier > prev)
      throw ParameterError("regime: multipliers must be non-increasing");
    prev = ph.multiplier;
  }
  Regime r;
  r.phases = std::move(phases);
  r.base_lr = base_lr;
  r.base_batch = base_batch;
  return r;
}

Regime regime_adapt(const Regime& regime, std::size_t large_batch) {
  if (large_batch < regime.base_batch)
    throw ParameterError("regime_adapt: large batch smaller than base batch");
  Regime r = regime;
  for (Phase& ph : r.phases)
    ph.epochs = (ph.epochs * large_batch + regime.base_batch - 1) / regime.base_batch;
  return r;
}

double lr_at(const Regime& regime, std::size_t iteration, std::size_t iters_per_epoch) {
  if (iters_per_epoch == 0) throw ParameterError("lr_at: zero iterations per epoch");
  const std::size_t epoch = iteration / iters_per_epoch;
  std::size_t upto = 0;
  for (const Phase& ph : regime.phases) {
    upto += ph.epochs;
    if (epoch < upto) return regime.base_lr * ph.multiplier;
  }
  return regime.base_lr * regime.phases.back().multiplier;
}

std::size_t regime_epochs(const Regime& regime) {
  std::size_t total = 0;
  for (const Phase& ph : regime.phases) total += ph.epochs;
  return total;
}

}  // namespace batchlab
