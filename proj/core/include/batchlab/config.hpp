#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/network.hpp"
#include "batchlab/optimizer.hpp"

namespace batchlab {

// Run configuration, an INI-style file with fixed sections. Every derived
// quantity (scaled learning rate, noise variance, adapted schedule) is
// recomputed from these inputs on demand and never stored back, so a config
// file is always the complete, minimal description of a run.

struct DatasetSpec {
  std::string source = "synthetic";  // synthetic | mnist | csv
  std::string path = "data";         // mnist: IDX directory; csv: file path
  std::size_t subset = 10000;        // training rows
  std::size_t val_size = 2000;       // held-out rows (0 = no validation)
  std::uint64_t seed = 7;            // materialization / shuffle stream
};

struct ModelSpec {
  std::vector<std::size_t> dims = {784, 256, 256, 10};
  std::string norm = "batch";  // none | batch | ghost
  std::size_t ghost_size = 128;
};

struct OptimizerSpec {
  double lr = 0.1;  // small-batch base rate
  double momentum = 0.9;
  std::size_t batch_small = 64;
  std::size_t batch_large = 1024;
  std::vector<Phase> schedule = {{6, 1.0}, {4, 0.1}};
  bool clip_first_epoch = true;
  double clip_scale = 1.0;      // clip threshold in units of |g| at init
  std::string lr_rule = "sqrt";  // sqrt | linear, used when lr_scale is set
};

// Which large-batch remedies a single `train` run applies. The ablation
// ladder ignores these and sets its own flags rung by rung.
struct AblationFlags {
  bool large_batch = false;
  bool lr_scale = false;
  bool gbn = false;
  bool regime_adapt = false;
  bool mult_noise = false;
};

struct LoggingSpec {
  bool distance_pow2 = true;         // log |w - w0| at t = 1, 2, 4, ...
  std::size_t distance_stride = 0;   // ... and every k iterations (0 = off)
  std::size_t eval_every = 1;        // epochs between validation passes
};

struct RunConfig {
  std::string kind = "train";
  std::uint64_t seed = 12345;  // master seed for all run streams
  std::string out_dir = "runs/out";
  DatasetSpec dataset;
  ModelSpec model;
  OptimizerSpec optimizer;
  AblationFlags ablation;
  LoggingSpec logging;
};

RunConfig default_config();

// Parses and validates. Unknown sections or keys, malformed values and
// inconsistent settings (e.g. ghost_size > batch_large) throw ConfigError
// naming the offending key path.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Canonical serialization: fixed section and key order, shortest lossless
// number formatting. parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& cfg);

// serialize_config plus trailing comment lines stating the derived
// quantities in effect (effective lr, batch, noise variance, total epochs).
// Comments are ignored by the parser, so the snapshot still round-trips.
std::string effective_config_text(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

// Derived quantities. Each applies the corresponding ablation flag to the
// base optimizer settings; with the flag off they return the base value.
std::size_t effective_batch(const RunConfig& cfg);
double effective_lr(const RunConfig& cfg);
NoiseConfig effective_noise(const RunConfig& cfg);
Regime effective_regime(const RunConfig& cfg);
Norm effective_norm(const RunConfig& cfg);

// FNV-1a 64-bit running hash; identifies run inputs in reports.
std::uint64_t content_hash(std::uint64_t h, const void* bytes, std::size_t n);
constexpr std::uint64_t kHashSeed = 1469598103934665603ull;

}  // namespace batchlab
