#include "batchlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "batchlab/error.hpp"

namespace batchlab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Shortest decimal that parses back to exactly the same double.
std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void bad_value(const std::string& key, const char* expected,
                            const std::string& got) {
  throw ConfigError(key + ": expected " + expected + ", got '" + got + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used != v.size()) bad_value(key, "a real number", v);
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, "a real number", v);
  } catch (const std::out_of_range&) {
    bad_value(key, "a real number", v);
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') bad_value(key, "a non-negative integer", v);
    std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) bad_value(key, "a non-negative integer", v);
    return x;
  } catch (const std::invalid_argument&) {
    bad_value(key, "a non-negative integer", v);
  } catch (const std::out_of_range&) {
    bad_value(key, "a non-negative integer", v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad_value(key, "true or false", v);
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& v) {
  std::vector<std::size_t> dims;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ','))
    dims.push_back(static_cast<std::size_t>(parse_uint(key, trim(tok))));
  if (dims.empty()) bad_value(key, "a comma-separated dimension list", v);
  return dims;
}

std::vector<Phase> parse_schedule(const std::string& key, const std::string& v) {
  std::vector<Phase> phases;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    const std::size_t colon = tok.find(':');
    if (colon == std::string::npos) bad_value(key, "phases of the form epochs:mult", v);
    Phase p;
    p.epochs = static_cast<std::size_t>(parse_uint(key, trim(tok.substr(0, colon))));
    p.multiplier = parse_real(key, trim(tok.substr(colon + 1)));
    phases.push_back(p);
  }
  if (phases.empty()) bad_value(key, "phases of the form epochs:mult", v);
  return phases;
}

std::string dims_string(const std::vector<std::size_t>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(dims[i]);
  }
  return s;
}

std::string schedule_string(const std::vector<Phase>& phases) {
  std::string s;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(phases[i].epochs) + ':' + fmt_double(phases[i].multiplier);
  }
  return s;
}

void apply(RunConfig& cfg, const std::string& section, const std::string& key,
           const std::string& value) {
  const std::string path = section + "." + key;
  if (section == "experiment") {
    if (key == "kind")
      cfg.kind = value;
    else if (key == "seed")
      cfg.seed = parse_uint(path, value);
    else if (key == "out_dir")
      cfg.out_dir = value;
    else
      throw ConfigError("unknown key: " + path);
  } else if (section == "dataset") {
    if (key == "source")
      cfg.dataset.source = value;
    else if (key == "path")
      cfg.dataset.path = value;
    else if (key == "subset")
      cfg.dataset.subset = parse_uint(path, value);
    else if (key == "val_size")
      cfg.dataset.val_size = parse_uint(path, value);
    else if (key == "seed")
      cfg.dataset.seed = parse_uint(path, value);
    else
      throw ConfigError("unknown key: " + path);
  } else if (section == "model") {
    if (key == "dims")
      cfg.model.dims = parse_dims(path, value);
    else if (key == "norm")
      cfg.model.norm = value;
    else if (key == "ghost_size")
      cfg.model.ghost_size = parse_uint(path, value);
    else
      throw ConfigError("unknown key: " + path);
  } else if (section == "optimizer") {
    if (key == "lr")
      cfg.optimizer.lr = parse_real(path, value);
    else if (key == "momentum")
      cfg.optimizer.momentum = parse_real(path, value);
    else if (key == "batch_small")
      cfg.optimizer.batch_small = parse_uint(path, value);
    else if (key == "batch_large")
      cfg.optimizer.batch_large = parse_uint(path, value);
    else if (key == "schedule")
      cfg.optimizer.schedule = parse_schedule(path, value);
    else if (key == "clip_first_epoch")
      cfg.optimizer.clip_first_epoch = parse_bool(path, value);
    else if (key == "clip_scale")
      cfg.optimizer.clip_scale = parse_real(path, value);
    else if (key == "lr_rule")
      cfg.optimizer.lr_rule = value;
    else
      throw ConfigError("unknown key: " + path);
  } else if (section == "ablation") {
    if (key == "large_batch")
      cfg.ablation.large_batch = parse_bool(path, value);
    else if (key == "lr_scale")
      cfg.ablation.lr_scale = parse_bool(path, value);
    else if (key == "gbn")
      cfg.ablation.gbn = parse_bool(path, value);
    else if (key == "regime_adapt")
      cfg.ablation.regime_adapt = parse_bool(path, value);
    else if (key == "mult_noise")
      cfg.ablation.mult_noise = parse_bool(path, value);
    else
      throw ConfigError("unknown key: " + path);
  } else if (section == "logging") {
    if (key == "distance_pow2")
      cfg.logging.distance_pow2 = parse_bool(path, value);
    else if (key == "distance_stride")
      cfg.logging.distance_stride = parse_uint(path, value);
    else if (key == "eval_every")
      cfg.logging.eval_every = parse_uint(path, value);
    else
      throw ConfigError("unknown key: " + path);
  } else {
    throw ConfigError("unknown section: [" + section + "]");
  }
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": key outside any section: " + key);
    apply(cfg, section, key, value);
  }
  validate_config(cfg);
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("parse_config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string serialize_config(const RunConfig& cfg) {
  std::string s;
  s += "[experiment]\n";
  s += "kind = " + cfg.kind + "\n";
  s += "seed = " + std::to_string(cfg.seed) + "\n";
  s += "out_dir = " + cfg.out_dir + "\n\n";
  s += "[dataset]\n";
  s += "source = " + cfg.dataset.source + "\n";
  s += "path = " + cfg.dataset.path + "\n";
  s += "subset = " + std::to_string(cfg.dataset.subset) + "\n";
  s += "val_size = " + std::to_string(cfg.dataset.val_size) + "\n";
  s += "seed = " + std::to_string(cfg.dataset.seed) + "\n\n";
  s += "[model]\n";
  s += "dims = " + dims_string(cfg.model.dims) + "\n";
  s += "norm = " + cfg.model.norm + "\n";
  s += "ghost_size = " + std::to_string(cfg.model.ghost_size) + "\n\n";
  s += "[optimizer]\n";
  s += "lr = " + fmt_double(cfg.optimizer.lr) + "\n";
  s += "momentum = " + fmt_double(cfg.optimizer.momentum) + "\n";
  s += "batch_small = " + std::to_string(cfg.optimizer.batch_small) + "\n";
  s += "batch_large = " + std::to_string(cfg.optimizer.batch_large) + "\n";
  s += "schedule = " + schedule_string(cfg.optimizer.schedule) + "\n";
  s += std::string("clip_first_epoch = ") +
       (cfg.optimizer.clip_first_epoch ? "true" : "false") + "\n";
  s += "clip_scale = " + fmt_double(cfg.optimizer.clip_scale) + "\n";
  s += "lr_rule = " + cfg.optimizer.lr_rule + "\n\n";
  s += "[ablation]\n";
  s += std::string("large_batch = ") + (cfg.ablation.large_batch ? "true" : "false") +
       "\n";
  s += std::string("lr_scale = ") + (cfg.ablation.lr_scale ? "true" : "false") + "\n";
  s += std::string("gbn = ") + (cfg.ablation.gbn ? "true" : "false") + "\n";
  s += std::string("regime_adapt = ") +
       (cfg.ablation.regime_adapt ? "true" : "false") + "\n";
  s += std::string("mult_noise = ") + (cfg.ablation.mult_noise ? "true" : "false") +
       "\n\n";
  s += "[logging]\n";
  s += std::string("distance_pow2 = ") + (cfg.logging.distance_pow2 ? "true" : "false") +
       "\n";
  s += "distance_stride = " + std::to_string(cfg.logging.distance_stride) + "\n";
  s += "eval_every = " + std::to_string(cfg.logging.eval_every) + "\n";
  return s;
}

std::string effective_config_text(const RunConfig& cfg) {
  std::string s = serialize_config(cfg);
  const NoiseConfig noise = effective_noise(cfg);
  const Regime regime = effective_regime(cfg);
  s += "\n";
  s += "# derived: batch = " + std::to_string(effective_batch(cfg)) + "\n";
  s += "# derived: lr = " + fmt_double(effective_lr(cfg)) + "\n";
  s += "# derived: noise_sigma_sq = " + fmt_double(noise.sigma_sq) + "\n";
  s += "# derived: epochs = " + std::to_string(regime_epochs(regime)) + "\n";
  return s;
}

void validate_config(const RunConfig& cfg) {
  static const char* kinds[] = {"train",    "ablate", "cov-verify", "walk",
                                "ray-scan", "logistic", "fit",      "report"};
  if (std::find_if(std::begin(kinds), std::end(kinds),
                   [&](const char* k) { return cfg.kind == k; }) == std::end(kinds))
    throw ConfigError("experiment.kind: unknown kind '" + cfg.kind + "'");
  if (cfg.dataset.source != "synthetic" && cfg.dataset.source != "mnist" &&
      cfg.dataset.source != "csv")
    throw ConfigError("dataset.source: must be synthetic, mnist or csv");
  if (cfg.dataset.subset < 1) throw ConfigError("dataset.subset: must be >= 1");
  if (cfg.model.dims.size() < 2)
    throw ConfigError("model.dims: needs input and output sizes");
  for (std::size_t d : cfg.model.dims)
    if (d < 1) throw ConfigError("model.dims: every dimension must be >= 1");
  if (cfg.model.norm != "none" && cfg.model.norm != "batch" &&
      cfg.model.norm != "ghost")
    throw ConfigError("model.norm: must be none, batch or ghost");
  if (cfg.model.ghost_size < 1) throw ConfigError("model.ghost_size: must be >= 1");
  if (cfg.model.ghost_size > cfg.optimizer.batch_large)
    throw ConfigError("model.ghost_size: exceeds optimizer.batch_large");
  if (!(cfg.optimizer.lr > 0.0)) throw ConfigError("optimizer.lr: must be > 0");
  if (!(cfg.optimizer.momentum >= 0.0) || cfg.optimizer.momentum >= 1.0)
    throw ConfigError("optimizer.momentum: must lie in [0, 1)");
  if (cfg.optimizer.batch_small < 1)
    throw ConfigError("optimizer.batch_small: must be >= 1");
  if (cfg.optimizer.batch_large < cfg.optimizer.batch_small)
    throw ConfigError("optimizer.batch_large: must be >= batch_small");
  if (!(cfg.optimizer.clip_scale > 0.0))
    throw ConfigError("optimizer.clip_scale: must be > 0");
  if (cfg.optimizer.lr_rule != "sqrt" && cfg.optimizer.lr_rule != "linear")
    throw ConfigError("optimizer.lr_rule: must be sqrt or linear");
  try {
    make_regime(cfg.optimizer.schedule, cfg.optimizer.lr, cfg.optimizer.batch_small);
  } catch (const Error& e) {
    throw ConfigError(std::string("optimizer.schedule: ") + e.what());
  }
  if (cfg.logging.eval_every < 1) throw ConfigError("logging.eval_every: must be >= 1");
}

std::size_t effective_batch(const RunConfig& cfg) {
  return cfg.ablation.large_batch ? cfg.optimizer.batch_large
                                  : cfg.optimizer.batch_small;
}

double effective_lr(const RunConfig& cfg) {
  if (!cfg.ablation.large_batch || !cfg.ablation.lr_scale) return cfg.optimizer.lr;
  if (cfg.optimizer.lr_rule == "linear")
    return linear_lr_scale(cfg.optimizer.lr, cfg.optimizer.batch_small,
                           cfg.optimizer.batch_large);
  return sqrt_lr_scale(cfg.optimizer.lr, cfg.optimizer.batch_small,
                       cfg.optimizer.batch_large);
}

NoiseConfig effective_noise(const RunConfig& cfg) {
  if (!cfg.ablation.mult_noise) return NoiseConfig{};
  return match_small_batch_noise(cfg.optimizer.batch_small, cfg.optimizer.batch_large);
}

Regime effective_regime(const RunConfig& cfg) {
  Regime base = make_regime(cfg.optimizer.schedule, cfg.optimizer.lr,
                            cfg.optimizer.batch_small);
  if (cfg.ablation.large_batch && cfg.ablation.regime_adapt)
    return regime_adapt(base, cfg.optimizer.batch_large);
  return base;
}

Norm effective_norm(const RunConfig& cfg) {
  std::string norm = cfg.model.norm;
  if (cfg.ablation.gbn) norm = "ghost";
  if (norm == "none") return Norm::none;
  if (norm == "batch") return Norm::batch;
  return Norm::ghost;
}

std::uint64_t content_hash(std::uint64_t h, const void* bytes, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace batchlab
