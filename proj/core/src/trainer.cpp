#include "batchlab/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "batchlab/error.hpp"
#include "batchlab/idx.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

namespace {

Dataset slice_rows(const Dataset& ds, std::size_t begin, std::size_t count) {
  Dataset out;
  out.num_classes = ds.num_classes;
  out.inputs = Tensor::zeros({count, ds.dim()});
  out.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::memcpy(out.inputs.row(i), ds.inputs.row(begin + i), ds.dim() * sizeof(double));
    out.labels[i] = ds.labels[begin + i];
  }
  return out;
}

bool is_pow2(std::uint64_t u) { return u != 0 && (u & (u - 1)) == 0; }

}  // namespace

TrainPlan plan_from_config(const RunConfig& cfg) {
  validate_config(cfg);
  TrainPlan plan;
  plan.model.dims = cfg.model.dims;
  plan.model.norm = effective_norm(cfg);
  plan.model.ghost_size = cfg.model.ghost_size;
  plan.regime = effective_regime(cfg);
  plan.regime.base_lr = effective_lr(cfg);
  plan.batch = effective_batch(cfg);
  plan.momentum = cfg.optimizer.momentum;
  plan.noise = effective_noise(cfg);
  plan.clip_first_epoch = cfg.optimizer.clip_first_epoch;
  plan.clip_scale = cfg.optimizer.clip_scale;
  plan.seed = cfg.seed;
  plan.eval_every = cfg.logging.eval_every;
  plan.distance_pow2 = cfg.logging.distance_pow2;
  plan.distance_stride = cfg.logging.distance_stride;
  return plan;
}

void load_data(const DatasetSpec& spec, Dataset& train, Dataset& val) {
  const std::size_t want = spec.subset + spec.val_size;
  Dataset full;
  if (spec.source == "synthetic") {
    full = make_synthetic_images(spec.seed, want, 28, 10);
  } else if (spec.source == "mnist") {
    Dataset raw = load_mnist_idx(spec.path + "/train-images-idx3-ubyte",
                                 spec.path + "/train-labels-idx1-ubyte");
    full = subset_shuffled(raw, want, spec.seed);
  } else if (spec.source == "csv") {
    Dataset raw = load_dataset_csv(spec.path);
    full = subset_shuffled(raw, want, spec.seed);
  } else {
    throw ConfigError("dataset.source: must be synthetic, mnist or csv");
  }
  train = slice_rows(full, 0, spec.subset);
  val = slice_rows(full, spec.subset, spec.val_size);
}

TrainResult train_classifier(const TrainPlan& plan, const Dataset& train,
                             const Dataset& val) {
  validate_dataset(train);
  if (val.size() > 0) validate_dataset(val);
  if (plan.model.dims.front() != train.dim())
    throw DimensionError("train_classifier: model input width != data dimension");
  if (plan.model.dims.back() != static_cast<std::size_t>(train.num_classes))
    throw ConsistencyError("train_classifier: output width != number of classes");
  if (plan.batch < 1 || plan.batch > train.size())
    throw ParameterError("train_classifier: batch must lie in [1, train size]");
  if (plan.regime.phases.empty())
    throw ParameterError("train_classifier: schedule needs at least one phase");

  Rng root(plan.seed);
  Rng weight_rng = root.child(1);
  Rng sampler_rng = root.child(2);
  Rng noise_rng = root.child(3);

  TrainResult result;
  result.model = std::make_shared<Mlp>(plan.model, weight_rng);
  Mlp& model = *result.model;

  const std::size_t n = train.size(), d = train.dim();
  const std::size_t iters_per_epoch = (n + plan.batch - 1) / plan.batch;
  const std::size_t epochs = regime_epochs(plan.regime);
  result.high_lr_iterations = plan.regime.phases.front().epochs * iters_per_epoch;

  Tensor grad = Tensor::zeros({model.param_count()});

  SgdMomentum opt(plan.regime.base_lr, plan.momentum, model.param_count());
  if (plan.clip_first_epoch) {
    // Threshold in units of the full-batch gradient norm at initialization.
    model.loss_and_gradient(train.inputs, train.labels, nullptr, &grad,
                            /*update_stats=*/false);
    opt.set_clip_norm(plan.clip_scale * l2_norm(grad));
  }

  BatchSampler sampler(SampleMode::without_replacement, n, plan.batch, sampler_rng);
  const double sigma = std::sqrt(plan.noise.sigma_sq);

  std::vector<int> yb;
  std::vector<double> zb;
  std::uint64_t updates = 0;

  auto log_distance = [&](double batch_loss) {
    DistanceEntry e;
    e.t = updates;
    e.distance = model.weight_distance();
    e.train_loss = batch_loss;
    if (!result.distance.entries.empty() && result.distance.entries.back().t == e.t) {
      result.distance.entries.back().train_loss = batch_loss;
      return;
    }
    result.distance.entries.push_back(e);
  };

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double loss_sum = 0.0;
    double last_batch_loss = 0.0;
    for (std::size_t it = 0; it < iters_per_epoch; ++it) {
      const std::vector<std::size_t> idx = sampler.next_batch();
      const std::size_t m = idx.size();
      Tensor xb = Tensor::zeros({m, d});
      yb.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        std::memcpy(xb.row(i), train.inputs.row(idx[i]), d * sizeof(double));
        yb[i] = train.labels[idx[i]];
      }
      const std::vector<double>* weights = nullptr;
      if (plan.noise.sigma_sq > 0.0) {
        zb.resize(m);
        for (std::size_t i = 0; i < m; ++i) zb[i] = 1.0 + sigma * noise_rng.normal();
        weights = &zb;
      }
      const LossValue loss = model.loss_and_gradient(xb, yb, weights, &grad);
      opt.set_lr(lr_at(plan.regime, epoch * iters_per_epoch + it, iters_per_epoch));
      opt.step(model.params().w, grad);
      ++updates;
      loss_sum += loss.value;
      last_batch_loss = loss.value;

      const bool pow2_hit = plan.distance_pow2 && is_pow2(updates);
      const bool stride_hit =
          plan.distance_stride > 0 && updates % plan.distance_stride == 0;
      if (pow2_hit || stride_hit) log_distance(loss.value);
    }
    if (plan.clip_first_epoch && epoch == 0) opt.set_clip_norm(std::nullopt);

    EpochStat stat;
    stat.epoch = epoch + 1;
    stat.mean_train_loss = loss_sum / static_cast<double>(iters_per_epoch);
    const bool eval_now = val.size() > 0 && plan.eval_every > 0 &&
                          ((epoch + 1) % plan.eval_every == 0 || epoch + 1 == epochs);
    if (eval_now) stat.val_error = classification_error(model, val);
    result.epochs.push_back(stat);

    log_distance(last_batch_loss);
    if (eval_now) {
      result.distance.entries.back().val_error = stat.val_error;
      result.distance.entries.back().has_val = true;
    }
  }

  result.iterations = updates;
  result.final_train_error = classification_error(model, train);
  if (val.size() > 0) {
    result.final_val_error = result.epochs.back().val_error >= 0.0
                                 ? result.epochs.back().val_error
                                 : classification_error(model, val);
  }
  validate_series(result.distance);
  return result;
}

void save_epochs_csv(const std::vector<EpochStat>& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_epochs_csv: cannot open " + path);
  out << "epoch,mean_train_loss,val_error\n";
  char buf[32];
  for (const EpochStat& s : stats) {
    out << s.epoch << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", s.mean_train_loss);
    out << buf << ",";
    if (s.val_error >= 0.0) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.val_error);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("save_epochs_csv: write failed for " + path);
}

std::vector<EpochStat> load_epochs_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_epochs_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("load_epochs_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "epoch,mean_train_loss,val_error")
    throw FormatError("load_epochs_csv: unexpected header: " + line);
  std::vector<EpochStat> stats;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (line.back() == ',') cols.push_back("");
    if (cols.size() != 3)
      throw FormatError("load_epochs_csv: line " + std::to_string(lineno) +
                        ": expected 3 columns");
    EpochStat s;
    try {
      s.epoch = static_cast<std::size_t>(std::stoull(cols[0]));
      s.mean_train_loss = std::stod(cols[1]);
      s.val_error = cols[2].empty() ? -1.0 : std::stod(cols[2]);
    } catch (const std::exception&) {
      throw FormatError("load_epochs_csv: line " + std::to_string(lineno) +
                        ": malformed number");
    }
    stats.push_back(s);
  }
  return stats;
}

}  // namespace batchlab
