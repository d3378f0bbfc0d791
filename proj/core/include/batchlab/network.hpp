#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/batchnorm.hpp"
#include "batchlab/dataset.hpp"
#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

// Concatenated parameter vector plus a frozen snapshot of its value at
// initialization, for distance-from-init tracking. Layer views returned by
// the network alias w's storage directly.
struct FlatParams {
  Tensor w;
  Tensor w0;
  std::size_t size() const { return w.size(); }
};

enum class Norm { none, batch, ghost };
enum class Mode { train, eval };

struct MlpConfig {
  std::vector<std::size_t> dims;  // {in, hidden..., out}
  Norm norm = Norm::none;         // applied to hidden layers only
  std::size_t ghost_size = 128;   // rows per ghost slice when norm == ghost
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  bool bn_variance_space = false;
};

// Mean softmax cross-entropy with optional per-sample weights.
// per_sample[n] = weight_n * (logsumexp(logits_n) - logits_n[label_n]);
// value = mean(per_sample). If dlogits is non-null it receives
// d(value)/d(logits) — linear in the weights.
struct LossValue {
  double value = 0.0;
  Tensor per_sample;
};
LossValue softmax_xent(const Tensor& logits, const std::vector<int>& labels,
                       const std::vector<double>* weights, Tensor* dlogits);

// Glorot-uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

// A mutable window into the flat parameter vector (or a gradient laid out
// the same way): `data` points at rows*cols contiguous doubles.
struct ParamView {
  double* data = nullptr;
  std::size_t rows = 0, cols = 0;
  std::size_t offset = 0;  // position within the flat vector
  std::size_t count() const { return rows * cols; }
};

// Fully connected classifier: affine -> [norm] -> ReLU for each hidden
// layer, affine for the logits layer. Gradients are hand-derived and exact.
class Mlp {
 public:
  Mlp(MlpConfig cfg, Rng& rng);  // Glorot-uniform weights, zero biases

  const MlpConfig& config() const { return cfg_; }
  std::size_t blocks() const { return cfg_.dims.size() - 1; }
  std::size_t param_count() const { return params_.size(); }
  FlatParams& params() { return params_; }
  const FlatParams& params() const { return params_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m);

  // Views into the flat vector for block b (affine W is dims[b] x dims[b+1]).
  ParamView weight_view(std::size_t b);
  ParamView bias_view(std::size_t b);
  ParamView gamma_view(std::size_t b);  // norm blocks only
  ParamView beta_view(std::size_t b);

  bool block_has_norm(std::size_t b) const;
  BnState& bn_state(std::size_t b);
  const BnState& bn_state(std::size_t b) const;

  // Logits for a batch. Train mode normalizes with batch statistics, caches
  // intermediates for backward and (if update_stats) advances the running
  // statistics; eval mode uses running statistics and is row-wise pure.
  Tensor forward(const Tensor& x, bool update_stats = true);

  // Gradient of mean (optionally weighted) cross-entropy at the cached
  // forward pass. grad has the flat layout of params().w. Returns the loss.
  // Requires a train-mode forward first (StateError otherwise).
  LossValue backward(const std::vector<int>& labels, const std::vector<double>* weights,
                     Tensor* grad);

  // forward + backward in one call, from train mode.
  LossValue loss_and_gradient(const Tensor& x, const std::vector<int>& labels,
                              const std::vector<double>* weights, Tensor* grad,
                              bool update_stats = true);

  // ||w - w0|| over the whole flat vector.
  double weight_distance() const;

  // Replace every norm layer's running statistics with the statistics the
  // layer sees when the given inputs flow through as one full batch
  // (equivalent to one train pass with a single slice and momentum 1).
  // Weights are untouched.
  void recalibrate_bn(const Tensor& inputs);

 private:
  struct BlockLayout {
    std::size_t w_off = 0, b_off = 0, gamma_off = 0, beta_off = 0;
    bool has_norm = false, has_relu = false;
    std::size_t in = 0, out = 0;
    int norm_index = -1;  // into bn_states_
  };
  struct BlockCache {
    Tensor input;   // into affine
    Tensor preact;  // value fed to ReLU (post-norm if normed)
    BnCache bn;
  };

  void build_layout();
  const BlockLayout& layout(std::size_t b) const;

  MlpConfig cfg_;
  std::vector<BlockLayout> blocks_;
  std::vector<BnState> bn_states_;
  FlatParams params_;
  Mode mode_ = Mode::train;

  std::vector<BlockCache> cache_;
  Tensor logits_;
  bool cache_valid_ = false;

  friend void save_checkpoint(const Mlp& model, const std::string& path);
  friend Mlp load_checkpoint(const std::string& path);
};

// Self-describing binary checkpoint: layer spec, flat w and w0, and all
// running statistics. Round trips are bit-exact.
void save_checkpoint(const Mlp& model, const std::string& path);
Mlp load_checkpoint(const std::string& path);

// Fraction of argmax misclassifications, computed in eval mode in chunks.
// Restores the model's previous mode before returning.
double classification_error(Mlp& model, const Dataset& ds, std::size_t chunk = 512);

}  // namespace batchlab
