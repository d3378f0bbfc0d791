#pragma once

#include <cstddef>
#include <vector>

#include "batchlab/tensor.hpp"

namespace batchlab {

// State of one (ghost) batch-normalization layer over d features.
//
// gamma/beta are trainable and live in the owning network's flat parameter
// vector; this struct carries only the running statistics plus shape and
// hyper-parameters. `ghost` is the virtual batch size: normalization
// statistics are computed per ghost slice of `ghost` consecutive rows. A
// trailing slice shorter than `ghost` is normalized with its own statistics.
//
// Running statistics follow a sequential exponential moving average applied
// once per ghost slice, in ascending slice order:
//   mu_run    <- (1 - momentum) * mu_run    + momentum * mu_slice
//   sigma_run <- (1 - momentum) * sigma_run + momentum * sigma_slice
// where sigma_slice = sqrt(biased variance + epsilon). With one slice this
// is exactly the standard BN update. By default the EMA runs in std space
// (sigma values averaged directly); set variance_space to average
// sigma_slice^2 instead, in which case eval uses sqrt(sigma_run).
struct BnState {
  std::size_t d = 0;
  std::size_t ghost = 0;  // rows per ghost slice
  double momentum = 0.1;
  double epsilon = 1e-5;
  bool variance_space = false;

  Tensor mu_run;     // [d]
  Tensor sigma_run;  // [d] (std or variance, per variance_space)
  bool initialized = false;  // flips on the first training pass

  static BnState make(std::size_t d, std::size_t ghost, double momentum, double epsilon,
                      bool variance_space = false);
};

// Everything backward needs from the training-time forward pass.
struct BnCache {
  std::vector<std::size_t> slice_begin;  // slice s = rows [slice_begin[s], slice_begin[s+1])
  Tensor xhat;   // [M x d] normalized activations
  Tensor sigma;  // [n_slices x d] per-slice std (includes epsilon)
};

// Standard batch normalization over the whole batch: one set of statistics.
// Deliberately its own code path (not a single-slice call into the ghost
// version) so the two can be compared in tests.
Tensor bn_train_forward(BnState& st, const double* gamma, const double* beta, const Tensor& x,
                        BnCache* cache, bool update_stats = true);

// Ghost batch normalization: x is split into consecutive slices of st.ghost
// rows, each normalized with its own mean/std; running stats are EMA-updated
// per slice in ascending order.
Tensor gbn_train_forward(BnState& st, const double* gamma, const double* beta, const Tensor& x,
                         BnCache* cache, bool update_stats = true);

// Inference-phase normalization with running statistics. Row-wise pure:
// output for a row never depends on the rest of the batch. Throws StateError
// until the layer has seen at least one training pass.
Tensor bn_eval_forward(const BnState& st, const double* gamma, const double* beta,
                       const Tensor& x);

// Gradient through the normalization. dy is the loss gradient at the layer
// output; returns dx and accumulates dgamma/dbeta (both length d, caller
// zeroes them). Statistics gradients flow within each ghost slice; running
// statistics are constants.
Tensor bn_backward(const BnState& st, const BnCache& cache, const double* gamma,
                   const Tensor& dy, double* dgamma, double* dbeta);

}  // namespace batchlab
