#include "batchlab/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "batchlab/error.hpp"

namespace batchlab {

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0) throw ParameterError("glorot_bound: zero fan");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

LossValue softmax_xent(const Tensor& logits, const std::vector<int>& labels,
                       const std::vector<double>* weights, Tensor* dlogits) {
  if (logits.rank() != 2 || logits.rows() != labels.size())
    throw DimensionError("softmax_xent: logits/labels disagree");
  if (weights && weights->size() != labels.size())
    throw DimensionError("softmax_xent: weights length");
  const std::size_t m = logits.rows(), c = logits.cols();

  LossValue out;
  out.per_sample = Tensor::zeros({m});
  if (dlogits) *dlogits = Tensor::zeros({m, c});
  double total = 0.0;
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ConsistencyError("softmax_xent: label out of range");
    const double* li = logits.row(i);
    double top = li[0];
    for (std::size_t j = 1; j < c; ++j) top = std::max(top, li[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(li[j] - top);
    const double lse = top + std::log(z);
    const double wn = weights ? (*weights)[i] : 1.0;
    out.per_sample[i] = wn * (lse - li[static_cast<std::size_t>(y)]);
    total += out.per_sample[i];
    if (dlogits) {
      double* di = dlogits->row(i);
      const double scale = wn * inv_m;
      for (std::size_t j = 0; j < c; ++j) {
        const double p = std::exp(li[j] - lse);
        di[j] = scale * (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0));
      }
    }
  }
  out.value = total * inv_m;
  return out;
}

void Mlp::build_layout() {
  if (cfg_.dims.size() < 2) throw ParameterError("mlp: need at least input and output dims");
  for (std::size_t d : cfg_.dims)
    if (d == 0) throw ParameterError("mlp: zero layer width");
  if (cfg_.norm == Norm::ghost && cfg_.ghost_size == 0)
    throw ParameterError("mlp: ghost size must be positive");

  std::size_t off = 0;
  const std::size_t nb = cfg_.dims.size() - 1;
  blocks_.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    BlockLayout& L = blocks_[b];
    L.in = cfg_.dims[b];
    L.out = cfg_.dims[b + 1];
    L.has_relu = (b + 1 < nb);
    L.has_norm = (b + 1 < nb) && cfg_.norm != Norm::none;
    L.w_off = off;
    off += L.in * L.out;
    L.b_off = off;
    off += L.out;
    if (L.has_norm) {
      L.gamma_off = off;
      off += L.out;
      L.beta_off = off;
      off += L.out;
      L.norm_index = static_cast<int>(bn_states_.size());
      const std::size_t ghost = (cfg_.norm == Norm::ghost) ? cfg_.ghost_size : 0;
      bn_states_.push_back(BnState::make(L.out, ghost == 0 ? 1 : ghost, cfg_.bn_momentum,
                                         cfg_.bn_epsilon, cfg_.bn_variance_space));
      // ghost==0 marks the standard-BN path; make() wants a positive value,
      // so patch afterwards.
      bn_states_.back().ghost = ghost;
    }
  }
  params_.w = Tensor::zeros({off});
}

Mlp::Mlp(MlpConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  build_layout();
  for (std::size_t b = 0; b < blocks(); ++b) {
    const BlockLayout& L = blocks_[b];
    const double bound = glorot_bound(L.in, L.out);
    double* w = params_.w.data();
    for (std::size_t i = 0; i < L.in * L.out; ++i) w[L.w_off + i] = rng.uniform(-bound, bound);
    // biases stay zero
    if (L.has_norm) {
      for (std::size_t j = 0; j < L.out; ++j) w[L.gamma_off + j] = 1.0;
      // betas stay zero
    }
  }
  params_.w0 = params_.w;
}

const Mlp::BlockLayout& Mlp::layout(std::size_t b) const {
  if (b >= blocks_.size()) throw ParameterError("mlp: block index out of range");
  return blocks_[b];
}

ParamView Mlp::weight_view(std::size_t b) {
  const BlockLayout& L = layout(b);
  return {params_.w.data() + L.w_off, L.in, L.out, L.w_off};
}
ParamView Mlp::bias_view(std::size_t b) {
  const BlockLayout& L = layout(b);
  return {params_.w.data() + L.b_off, 1, L.out, L.b_off};
}
ParamView Mlp::gamma_view(std::size_t b) {
  const BlockLayout& L = layout(b);
  if (!L.has_norm) throw StateError("mlp: block has no normalization");
  return {params_.w.data() + L.gamma_off, 1, L.out, L.gamma_off};
}
ParamView Mlp::beta_view(std::size_t b) {
  const BlockLayout& L = layout(b);
  if (!L.has_norm) throw StateError("mlp: block has no normalization");
  return {params_.w.data() + L.beta_off, 1, L.out, L.beta_off};
}

bool Mlp::block_has_norm(std::size_t b) const { return layout(b).has_norm; }

BnState& Mlp::bn_state(std::size_t b) {
  const BlockLayout& L = layout(b);
  if (!L.has_norm) throw StateError("mlp: block has no normalization");
  return bn_states_[static_cast<std::size_t>(L.norm_index)];
}
const BnState& Mlp::bn_state(std::size_t b) const {
  const BlockLayout& L = layout(b);
  if (!L.has_norm) throw StateError("mlp: block has no normalization");
  return bn_states_[static_cast<std::size_t>(L.norm_index)];
}

void Mlp::set_mode(Mode m) {
  mode_ = m;
  cache_valid_ = false;
}

Tensor Mlp::forward(const Tensor& x, bool update_stats) {
  if (x.rank() != 2 || x.cols() != cfg_.dims.front())
    throw DimensionError("mlp: input width does not match first layer");
  const bool training = (mode_ == Mode::train);
  if (training) {
    cache_.assign(blocks(), BlockCache{});
    cache_valid_ = false;
  }

  Tensor a = x;
  const double* w = params_.w.data();
  for (std::size_t b = 0; b < blocks(); ++b) {
    const BlockLayout& L = blocks_[b];
    if (training) cache_[b].input = a;

    // affine: z = a W + bias
    Tensor wmat({L.in, L.out},
                std::vector<double>(w + L.w_off, w + L.w_off + L.in * L.out));
    Tensor z = matmul(a, wmat);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double* zi = z.row(i);
      for (std::size_t j = 0; j < L.out; ++j) zi[j] += w[L.b_off + j];
    }

    if (L.has_norm) {
      BnState& st = bn_states_[static_cast<std::size_t>(L.norm_index)];
      const double* gamma = w + L.gamma_off;
      const double* beta = w + L.beta_off;
      if (training) {
        BnCache* bc = &cache_[b].bn;
        z = (st.ghost == 0) ? bn_train_forward(st, gamma, beta, z, bc, update_stats)
                            : gbn_train_forward(st, gamma, beta, z, bc, update_stats);
      } else {
        z = bn_eval_forward(st, gamma, beta, z);
      }
    }

    if (L.has_relu) {
      if (training) cache_[b].preact = z;
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
    a = std::move(z);
  }
  if (training) {
    logits_ = a;
    cache_valid_ = true;
  }
  return a;
}

LossValue Mlp::backward(const std::vector<int>& labels, const std::vector<double>* weights,
                        Tensor* grad) {
  if (mode_ != Mode::train || !cache_valid_)
    throw StateError("mlp: backward requires a cached train-mode forward pass");
  if (labels.size() != logits_.rows())
    throw DimensionError("mlp: label count does not match cached batch");

  Tensor dflat = Tensor::zeros({params_.size()});
  Tensor da;
  LossValue loss = softmax_xent(logits_, labels, weights, &da);

  double* g = dflat.data();
  const double* w = params_.w.data();
  for (std::size_t bi = blocks(); bi-- > 0;) {
    const BlockLayout& L = blocks_[bi];
    BlockCache& C = cache_[bi];

    if (L.has_relu) {
      for (std::size_t i = 0; i < da.size(); ++i)
        if (!(C.preact[i] > 0.0)) da[i] = 0.0;
    }
    if (L.has_norm) {
      const BnState& st = bn_states_[static_cast<std::size_t>(L.norm_index)];
      da = bn_backward(st, C.bn, w + L.gamma_off, da, g + L.gamma_off, g + L.beta_off);
    }

    // z = input W + bias
    Tensor dw = matmul_ta(C.input, da);
    std::memcpy(g + L.w_off, dw.data(), dw.size() * sizeof(double));
    for (std::size_t i = 0; i < da.rows(); ++i) {
      const double* di = da.row(i);
      for (std::size_t j = 0; j < L.out; ++j) g[L.b_off + j] += di[j];
    }
    if (bi > 0) {
      Tensor wmat({L.in, L.out},
                  std::vector<double>(w + L.w_off, w + L.w_off + L.in * L.out));
      da = matmul_tb(da, wmat);
    }
  }
  if (grad) *grad = std::move(dflat);
  return loss;
}

LossValue Mlp::loss_and_gradient(const Tensor& x, const std::vector<int>& labels,
                                 const std::vector<double>* weights, Tensor* grad,
                                 bool update_stats) {
  if (mode_ != Mode::train) throw StateError("mlp: loss_and_gradient requires train mode");
  forward(x, update_stats);
  return backward(labels, weights, grad);
}

double Mlp::weight_distance() const {
  double acc = 0.0;
  const double* w = params_.w.data();
  const double* w0 = params_.w0.data();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const double d = w[i] - w0[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

void Mlp::recalibrate_bn(const Tensor& inputs) {
  if (bn_states_.empty()) return;
  if (inputs.rank() != 2 || inputs.cols() != cfg_.dims.front())
    throw DimensionError("mlp: recalibration input width mismatch");

  Tensor a = inputs;
  const double* w = params_.w.data();
  for (std::size_t b = 0; b < blocks(); ++b) {
    const BlockLayout& L = blocks_[b];
    Tensor wmat({L.in, L.out},
                std::vector<double>(w + L.w_off, w + L.w_off + L.in * L.out));
    Tensor z = matmul(a, wmat);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      double* zi = z.row(i);
      for (std::size_t j = 0; j < L.out; ++j) zi[j] += w[L.b_off + j];
    }
    if (L.has_norm) {
      BnState& st = bn_states_[static_cast<std::size_t>(L.norm_index)];
      // One full-population slice with momentum 1: running stats become the
      // dataset statistics of this layer's pre-normalization activations.
      BnState full = BnState::make(st.d, z.rows(), 0.5, st.epsilon, st.variance_space);
      full.momentum = 1.0;
      Tensor y = bn_train_forward(full, w + L.gamma_off, w + L.beta_off, z, nullptr, true);
      st.mu_run = full.mu_run;
      st.sigma_run = full.sigma_run;
      st.initialized = true;
      z = std::move(y);
    }
    if (L.has_relu)
      for (std::size_t i = 0; i < z.size(); ++i) z[i] = z[i] > 0.0 ? z[i] : 0.0;
    a = std::move(z);
  }
  cache_valid_ = false;
}

namespace {

constexpr char kCheckpointMagic[8] = {'B', 'L', 'N', 'E', 'T', '0', '0', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ofstream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint64_t get_u64(std::ifstream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("checkpoint: truncated file " + path);
  return v;
}
double get_f64(std::ifstream& in, const std::string& path) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw IoError("checkpoint: truncated file " + path);
  return v;
}

}  // namespace

void save_checkpoint(const Mlp& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);

  const MlpConfig& c = model.cfg_;
  put_u64(out, c.dims.size());
  for (std::size_t d : c.dims) put_u64(out, d);
  put_u64(out, static_cast<std::uint64_t>(c.norm));
  put_u64(out, c.ghost_size);
  put_f64(out, c.bn_momentum);
  put_f64(out, c.bn_epsilon);
  put_u64(out, c.bn_variance_space ? 1 : 0);

  put_u64(out, model.params_.size());
  out.write(reinterpret_cast<const char*>(model.params_.w.data()),
            static_cast<std::streamsize>(model.params_.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(model.params_.w0.data()),
            static_cast<std::streamsize>(model.params_.size() * sizeof(double)));

  put_u64(out, model.bn_states_.size());
  for (const BnState& st : model.bn_states_) {
    put_u64(out, st.d);
    put_u64(out, st.initialized ? 1 : 0);
    out.write(reinterpret_cast<const char*>(st.mu_run.data()),
              static_cast<std::streamsize>(st.d * sizeof(double)));
    out.write(reinterpret_cast<const char*>(st.sigma_run.data()),
              static_cast<std::streamsize>(st.d * sizeof(double)));
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic)) throw IoError("checkpoint: truncated file " + path);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw FormatError("checkpoint: bad magic in " + path);

  MlpConfig cfg;
  const std::uint64_t nd = get_u64(in, path);
  if (nd < 2 || nd > 64) throw FormatError("checkpoint: implausible layer count");
  cfg.dims.resize(nd);
  for (auto& d : cfg.dims) d = get_u64(in, path);
  cfg.norm = static_cast<Norm>(get_u64(in, path));
  cfg.ghost_size = get_u64(in, path);
  cfg.bn_momentum = get_f64(in, path);
  cfg.bn_epsilon = get_f64(in, path);
  cfg.bn_variance_space = get_u64(in, path) != 0;

  Rng throwaway(0);
  Mlp model(cfg, throwaway);

  const std::uint64_t np = get_u64(in, path);
  if (np != model.params_.size())
    throw ConsistencyError("checkpoint: parameter count does not match layer spec");
  if (!in.read(reinterpret_cast<char*>(model.params_.w.data()),
               static_cast<std::streamsize>(np * sizeof(double))))
    throw IoError("checkpoint: truncated parameters in " + path);
  if (!in.read(reinterpret_cast<char*>(model.params_.w0.data()),
               static_cast<std::streamsize>(np * sizeof(double))))
    throw IoError("checkpoint: truncated snapshot in " + path);

  const std::uint64_t ns = get_u64(in, path);
  if (ns != model.bn_states_.size())
    throw ConsistencyError("checkpoint: normalization layer count mismatch");
  for (BnState& st : model.bn_states_) {
    const std::uint64_t d = get_u64(in, path);
    if (d != st.d) throw ConsistencyError("checkpoint: normalization width mismatch");
    st.initialized = get_u64(in, path) != 0;
    if (!in.read(reinterpret_cast<char*>(st.mu_run.data()),
                 static_cast<std::streamsize>(d * sizeof(double))))
      throw IoError("checkpoint: truncated running stats in " + path);
    if (!in.read(reinterpret_cast<char*>(st.sigma_run.data()),
                 static_cast<std::streamsize>(d * sizeof(double))))
      throw IoError("checkpoint: truncated running stats in " + path);
  }
  return model;
}

double classification_error(Mlp& model, const Dataset& ds, std::size_t chunk) {
  validate_dataset(ds);
  if (chunk == 0) throw ParameterError("classification_error: zero chunk");
  const Mode saved = model.mode();
  model.set_mode(Mode::eval);
  std::size_t wrong = 0;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    const std::size_t stop = std::min(ds.size(), start + chunk);
    Tensor x = Tensor::zeros({stop - start, ds.dim()});
    std::memcpy(x.data(), ds.inputs.row(start), x.size() * sizeof(double));
    Tensor logits = model.forward(x);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      const double* li = logits.row(i);
      std::size_t best = 0;
      for (std::size_t j = 1; j < logits.cols(); ++j)
        if (li[j] > li[best]) best = j;
      if (best != static_cast<std::size_t>(ds.labels[start + i])) ++wrong;
    }
  }
  model.set_mode(saved);
  return static_cast<double>(wrong) / static_cast<double>(ds.size());
}

}  // namespace batchlab
