#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "batchlab/config.hpp"
#include "batchlab/dataset.hpp"
#include "batchlab/distance.hpp"
#include "batchlab/network.hpp"
#include "batchlab/optimizer.hpp"

namespace batchlab {

// A fully resolved single training run: every ablation flag has already
// been folded into these fields (see plan_from_config).
struct TrainPlan {
  MlpConfig model;
  Regime regime;
  std::size_t batch = 64;
  double momentum = 0.9;
  NoiseConfig noise;           // sigma_sq 0 = plain minibatch gradients
  bool clip_first_epoch = true;
  double clip_scale = 1.0;     // threshold in units of |gradient| at init
  std::uint64_t seed = 1;      // run stream: weights, sampler, noise
  std::size_t eval_every = 1;  // epochs; 0 never evaluates
  bool distance_pow2 = true;
  std::size_t distance_stride = 0;
};

struct EpochStat {
  std::size_t epoch = 0;        // 1-based
  double mean_train_loss = 0.0; // mean minibatch loss over the epoch
  double val_error = -1.0;      // fraction; negative = not evaluated
};

struct TrainResult {
  DistanceSeries distance;        // |w - w0| at logged update counts
  std::vector<EpochStat> epochs;
  double final_train_error = 0.0;
  double final_val_error = -1.0;  // negative when no validation set
  std::size_t iterations = 0;
  std::size_t high_lr_iterations = 0;  // updates spanned by the first phase
  std::shared_ptr<Mlp> model;
};

// Folds the config's ablation flags into a concrete plan: effective batch,
// scaled lr baked into the regime's base, ghost norm, adapted schedule,
// matched noise.
TrainPlan plan_from_config(const RunConfig& cfg);

// Materializes train/val sets per the dataset spec: synthetic image corpus,
// MNIST IDX files under spec.path, or a dataset CSV. val may come back
// empty (size 0) when val_size is 0.
void load_data(const DatasetSpec& spec, Dataset& train, Dataset& val);

// Momentum-SGD training loop. Minibatches walk a fresh permutation per
// epoch (the final batch of an epoch may be short). Distance from the
// initial weights is logged at power-of-two update counts, on the
// configured stride, and at every epoch end (the epoch-end entry carries
// the validation error when one was computed). First-epoch clipping uses
// clip_scale times the full-batch gradient norm at initialization.
// Deterministic for a fixed plan: reruns and different worker-thread
// budgets produce identical results bit for bit.
TrainResult train_classifier(const TrainPlan& plan, const Dataset& train,
                             const Dataset& val);

// CSV schema: epoch,mean_train_loss,val_error (val column empty when the
// epoch had no validation pass).
void save_epochs_csv(const std::vector<EpochStat>& stats, const std::string& path);
std::vector<EpochStat> load_epochs_csv(const std::string& path);

}  // namespace batchlab
