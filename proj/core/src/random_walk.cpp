#include "batchlab/random_walk.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "batchlab/error.hpp"
#include "batchlab/fit.hpp"
#include "batchlab/parallel.hpp"

namespace batchlab {

namespace {

// Signed edge/site index -> distinct u64 for the counter RNG.
std::uint64_t zigzag(std::int64_t v) {
  return v >= 0 ? 2ull * static_cast<std::uint64_t>(v)
                : 2ull * static_cast<std::uint64_t>(-v) - 1ull;
}

double clamped_accept(double delta_v, double temperature) {
  const double a = std::exp(-delta_v / temperature);
  return a < 1.0 ? a : 1.0;
}

}  // namespace

LatticeDisorder::LatticeDisorder(std::uint64_t seed, std::uint64_t stream,
                                 double increment_std, double temperature)
    : seed_(seed), stream_(stream), std_(increment_std), temperature_(temperature) {
  if (std_ < 0.0) throw ParameterError("LatticeDisorder: increment std must be >= 0");
  if (!(temperature_ > 0.0)) throw ParameterError("LatticeDisorder: temperature must be > 0");
}

double LatticeDisorder::increment(std::int64_t edge) const {
  if (std_ == 0.0) return 0.0;
  return std_ * normal_at(seed_, stream_, zigzag(edge));
}

LatticeDisorder::Acc LatticeDisorder::make_acc(std::int64_t edge) const {
  const double d = increment(edge);
  return Acc{clamped_accept(d, temperature_), clamped_accept(-d, temperature_)};
}

double LatticeDisorder::accept_up(std::int64_t edge) {
  if (edge >= 1) {
    const std::size_t i = static_cast<std::size_t>(edge - 1);
    while (pos_.size() <= i) pos_.push_back(make_acc(static_cast<std::int64_t>(pos_.size()) + 1));
    return pos_[i].up;
  }
  const std::size_t i = static_cast<std::size_t>(-edge);
  while (neg_.size() <= i) neg_.push_back(make_acc(-static_cast<std::int64_t>(neg_.size())));
  return neg_[i].up;
}

double LatticeDisorder::accept_down(std::int64_t edge) {
  if (edge >= 1) {
    const std::size_t i = static_cast<std::size_t>(edge - 1);
    while (pos_.size() <= i) pos_.push_back(make_acc(static_cast<std::int64_t>(pos_.size()) + 1));
    return pos_[i].down;
  }
  const std::size_t i = static_cast<std::size_t>(-edge);
  while (neg_.size() <= i) neg_.push_back(make_acc(-static_cast<std::int64_t>(neg_.size())));
  return neg_[i].down;
}

double LatticeDisorder::value(std::int64_t site) const {
  if (site == 0) return 0.0;
  if (site > 0) {
    const std::size_t i = static_cast<std::size_t>(site - 1);
    while (vpos_.size() <= i) {
      const std::int64_t edge = static_cast<std::int64_t>(vpos_.size()) + 1;
      const double prev = vpos_.empty() ? 0.0 : vpos_.back();
      vpos_.push_back(prev + increment(edge));
    }
    return vpos_[i];
  }
  const std::size_t i = static_cast<std::size_t>(-site - 1);
  while (vneg_.size() <= i) {
    // V(-s) = V(-s+1) - delta_{-s+1}
    const std::int64_t edge = -static_cast<std::int64_t>(vneg_.size());
    const double prev = vneg_.empty() ? 0.0 : vneg_.back();
    vneg_.push_back(prev - increment(edge));
  }
  return vneg_[i];
}

double FourierField::value(const double* w) const {
  const std::size_t k = amp.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double* om = omega.row(i);
    double arg = phase[i];
    for (std::size_t j = 0; j < dim; ++j) arg += om[j] * w[j];
    acc += amp[i] * std::cos(arg);
  }
  return acc;
}

double FourierField::value(const Tensor& w) const {
  if (w.size() != dim) throw DimensionError("FourierField::value: dimension mismatch");
  return value(w.data());
}

void FourierField::gradient(const double* w, double* out) const {
  const std::size_t k = amp.size();
  for (std::size_t j = 0; j < dim; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double* om = omega.row(i);
    double arg = phase[i];
    for (std::size_t j = 0; j < dim; ++j) arg += om[j] * w[j];
    const double s = amp[i] * std::sin(arg);
    for (std::size_t j = 0; j < dim; ++j) out[j] -= s * om[j];
  }
}

FourierField make_fourier_field(Rng& rng, std::size_t dim, double alpha,
                                std::size_t features, double amplitude,
                                double freq_min, double freq_max) {
  if (dim < 1) throw ParameterError("make_fourier_field: dimension must be >= 1");
  if (!(alpha > 0.0 && alpha < 2.0))
    throw ParameterError("make_fourier_field: alpha must lie in (0, 2)");
  if (features < 1) throw ParameterError("make_fourier_field: needs at least one feature");
  if (!(freq_min > 0.0 && freq_min < freq_max))
    throw ParameterError("make_fourier_field: need 0 < freq_min < freq_max");
  if (!(amplitude > 0.0)) throw ParameterError("make_fourier_field: amplitude must be > 0");

  FourierField field;
  field.dim = dim;
  field.alpha = alpha;
  field.omega = Tensor::zeros({features, dim});
  field.amp = Tensor::zeros({features});
  field.phase = Tensor::zeros({features});

  const double lo = std::log(freq_min), hi = std::log(freq_max);
  for (std::size_t i = 0; i < features; ++i) {
    const double u = std::exp(rng.uniform(lo, hi));
    // Uniform direction on the sphere.
    double dir[8];  // dim is small in practice; guard anyway
    if (dim > 8) throw ParameterError("make_fourier_field: dimension too large");
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        dir[j] = rng.normal();
        norm += dir[j] * dir[j];
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (std::size_t j = 0; j < dim; ++j) field.omega.at(i, j) = u * dir[j] / norm;
    field.amp[i] = std::pow(u, -0.5 * alpha);
    field.phase[i] = rng.uniform(0.0, 2.0 * M_PI);
  }
  // Normalize total power: sum a_k^2 = amplitude^2.
  double power = 0.0;
  for (std::size_t i = 0; i < features; ++i) power += field.amp[i] * field.amp[i];
  const double s = amplitude / std::sqrt(power);
  for (std::size_t i = 0; i < features; ++i) field.amp[i] *= s;
  return field;
}

const char* to_string(WalkDynamics dynamics) {
  switch (dynamics) {
    case WalkDynamics::metropolis_lattice:
      return "metropolis_lattice";
    case WalkDynamics::langevin_continuous:
      return "langevin_continuous";
  }
  return "unknown";
}

namespace {

void validate_config(const WalkConfig& c) {
  if (c.n_walkers < 100)
    throw ParameterError("run_diffusion_experiment: needs at least 100 walkers");
  if (c.t_max < 1) throw ParameterError("run_diffusion_experiment: t_max must be >= 1");
  if (c.checkpoints < 2)
    throw ParameterError("run_diffusion_experiment: needs at least 2 checkpoints");
  if (!(c.temperature > 0.0))
    throw ParameterError("run_diffusion_experiment: temperature must be > 0");
  if (c.dynamics == WalkDynamics::metropolis_lattice) {
    if (c.increment_std < 0.0)
      throw ParameterError("run_diffusion_experiment: increment std must be >= 0");
  } else {
    if (!(c.step_size > 0.0))
      throw ParameterError("run_diffusion_experiment: step size must be > 0");
    if (c.dim < 1 || c.dim > 8)
      throw ParameterError("run_diffusion_experiment: dimension must be in [1, 8]");
  }
}

double disorder_alpha(const WalkConfig& c) {
  if (c.dynamics == WalkDynamics::langevin_continuous) return c.alpha;
  return c.increment_std > 0.0 ? 1.0 : 0.0;
}

}  // namespace

DiffusionCurve run_diffusion_experiment(const WalkConfig& config) {
  validate_config(config);
  const std::vector<std::uint64_t> cks = log_spaced_times(config.t_max, config.checkpoints);
  const std::size_t n_ck = cks.size(), n_w = config.n_walkers;

  // disp2[k * n_w + w]: squared displacement of walker w at checkpoint k.
  // Walkers write disjoint columns, so the parallel fill is race-free and
  // the later fixed-order reduction is thread-count independent.
  std::vector<double> disp2(n_ck * n_w);

  std::atomic<bool> diverged{false};
  if (config.dynamics == WalkDynamics::metropolis_lattice) {
    parallel_for(0, static_cast<std::int64_t>(n_w), [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t w = lo; w < hi; ++w) {
        LatticeDisorder pot(config.seed, 2 * static_cast<std::uint64_t>(w) + 1,
                            config.increment_std, config.temperature);
        Rng rng(config.seed, 2 * static_cast<std::uint64_t>(w) + 2);
        std::int64_t x = 0;
        std::uint64_t t = 0;
        for (std::size_t k = 0; k < n_ck; ++k) {
          for (; t < cks[k]; ++t) {
            const std::uint64_t u = rng.next_u64();
            const double r = static_cast<double>(u >> 11) * 0x1p-53;
            if (u & 1) {
              if (r < pot.accept_up(x + 1)) ++x;
            } else {
              if (r < pot.accept_down(x)) --x;
            }
          }
          const double d = static_cast<double>(x);
          disp2[k * n_w + static_cast<std::size_t>(w)] = d * d;
        }
      }
    });
  } else {
    parallel_for(0, static_cast<std::int64_t>(n_w), [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t w = lo; w < hi; ++w) {
        Rng field_rng(config.seed, 2 * static_cast<std::uint64_t>(w) + 1);
        const FourierField field =
            make_fourier_field(field_rng, config.dim, config.alpha, config.features,
                               config.amplitude, config.freq_min, config.freq_max);
        Rng rng(config.seed, 2 * static_cast<std::uint64_t>(w) + 2);
        double pos[8] = {0};
        double grad[8];
        const double noise = std::sqrt(2.0 * config.temperature * config.step_size);
        std::uint64_t t = 0;
        for (std::size_t k = 0; k < n_ck; ++k) {
          for (; t < cks[k]; ++t) {
            field.gradient(pos, grad);
            for (std::size_t j = 0; j < config.dim; ++j)
              pos[j] += -config.step_size * grad[j] + noise * rng.normal();
          }
          double d2 = 0.0;
          for (std::size_t j = 0; j < config.dim; ++j) d2 += pos[j] * pos[j];
          if (!std::isfinite(d2)) diverged.store(true, std::memory_order_relaxed);
          disp2[k * n_w + static_cast<std::size_t>(w)] = d2;
        }
      }
    });
    if (diverged.load())
      throw NumericError("run_diffusion_experiment: a walker position diverged");
  }

  DiffusionCurve curve;
  curve.config = config;
  curve.points.resize(n_ck);
  for (std::size_t k = 0; k < n_ck; ++k) {
    const double* row = disp2.data() + k * n_w;
    double mean = 0.0;
    for (std::size_t w = 0; w < n_w; ++w) mean += row[w];
    mean /= static_cast<double>(n_w);
    double var = 0.0;
    for (std::size_t w = 0; w < n_w; ++w) {
      const double d = row[w] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n_w - 1);
    curve.points[k] = {cks[k], mean, std::sqrt(var / static_cast<double>(n_w))};
  }
  return curve;
}

void save_diffusion_csv(const DiffusionCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_diffusion_csv: cannot open " + path);
  out << "t,msd,stderr,n_walkers,alpha,dynamics\n";
  char buf[64];
  const double alpha = disorder_alpha(curve.config);
  for (const DiffusionPoint& p : curve.points) {
    out << p.t << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", p.msd);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", p.std_err);
    out << buf << "," << curve.config.n_walkers << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", alpha);
    out << buf << "," << to_string(curve.config.dynamics) << "\n";
  }
  if (!out) throw IoError("save_diffusion_csv: write failed for " + path);
}

DiffusionCurve load_diffusion_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_diffusion_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("load_diffusion_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,msd,stderr,n_walkers,alpha,dynamics")
    throw FormatError("load_diffusion_csv: unexpected header: " + line);

  DiffusionCurve curve;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 6) throw FormatError("load_diffusion_csv: expected 6 columns");
    try {
      DiffusionPoint p;
      p.t = std::stoull(cols[0]);
      p.msd = std::stod(cols[1]);
      p.std_err = std::stod(cols[2]);
      curve.points.push_back(p);
      if (first) {
        curve.config.n_walkers = std::stoull(cols[3]);
        curve.config.alpha = std::stod(cols[4]);
        if (cols[5] == "metropolis_lattice") {
          curve.config.dynamics = WalkDynamics::metropolis_lattice;
          curve.config.increment_std = curve.config.alpha > 0.0 ? 1.0 : 0.0;
        } else if (cols[5] == "langevin_continuous") {
          curve.config.dynamics = WalkDynamics::langevin_continuous;
        } else {
          throw FormatError("load_diffusion_csv: unknown dynamics " + cols[5]);
        }
        first = false;
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("load_diffusion_csv: malformed row: " + line);
    } catch (const std::out_of_range&) {
      throw FormatError("load_diffusion_csv: value out of range: " + line);
    }
  }
  if (curve.points.empty()) throw FormatError("load_diffusion_csv: no data rows");
  return curve;
}

std::vector<StructurePoint> lattice_structure_function(
    std::uint64_t seed, double increment_std, const std::vector<std::int64_t>& distances,
    std::size_t n_samples) {
  if (n_samples < 1000)
    throw ParameterError("lattice_structure_function: needs at least 1000 samples");
  if (increment_std < 0.0)
    throw ParameterError("lattice_structure_function: increment std must be >= 0");
  std::int64_t max_r = 0;
  for (std::int64_t r : distances) {
    if (r < 0) throw ParameterError("lattice_structure_function: negative distance");
    max_r = std::max(max_r, r);
  }

  std::vector<double> sum(distances.size(), 0.0), sum_sq(distances.size(), 0.0);
  std::vector<double> vals(distances.size());
  for (std::size_t s = 0; s < n_samples; ++s) {
    // One fresh disorder realization per sample. V(r) = sum of the first r
    // increments, accumulated in a single ascending pass; the statistic at
    // distance r is (V(r) - V(0))^2 = V(r)^2.
    double v = 0.0;
    for (std::size_t k = 0; k < distances.size(); ++k) vals[k] = 0.0;
    for (std::int64_t r = 1; r <= max_r; ++r) {
      v += increment_std * normal_at(seed, s, zigzag(r));
      for (std::size_t k = 0; k < distances.size(); ++k)
        if (distances[k] == r) vals[k] = v * v;
    }
    for (std::size_t k = 0; k < distances.size(); ++k) {
      sum[k] += vals[k];
      sum_sq[k] += vals[k] * vals[k];
    }
  }

  std::vector<StructurePoint> out(distances.size());
  const double n = static_cast<double>(n_samples);
  for (std::size_t k = 0; k < distances.size(); ++k) {
    const double mean = sum[k] / n;
    const double var = std::max(0.0, sum_sq[k] / n - mean * mean);
    out[k] = {static_cast<double>(distances[k]), mean, std::sqrt(var / n)};
  }
  return out;
}

std::vector<StructurePoint> structure_function(const FourierField& field,
                                               const std::vector<double>& distances,
                                               std::size_t n_pairs, Rng& rng) {
  if (n_pairs < 1000) throw ParameterError("structure_function: needs at least 1000 pairs");
  const std::size_t d = field.dim;
  if (d > 8) throw ParameterError("structure_function: dimension too large");

  std::vector<StructurePoint> out(distances.size());
  for (std::size_t k = 0; k < distances.size(); ++k) {
    const double r = distances[k];
    if (r < 0.0) throw ParameterError("structure_function: negative distance");
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t p = 0; p < n_pairs; ++p) {
      double w1[8], w2[8], dir[8];
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) w1[j] = 10.0 * rng.normal();
      do {
        norm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dir[j] = rng.normal();
          norm += dir[j] * dir[j];
        }
        norm = std::sqrt(norm);
      } while (norm < 1e-12);
      for (std::size_t j = 0; j < d; ++j) w2[j] = w1[j] + r * dir[j] / norm;
      const double diff = field.value(w1) - field.value(w2);
      sum += diff * diff;
      sum_sq += diff * diff * diff * diff;
    }
    const double n = static_cast<double>(n_pairs);
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    out[k] = {r, mean, std::sqrt(var / n)};
  }
  return out;
}

DiffusionFit estimate_diffusion_exponent(const DiffusionCurve& curve, double t_lo,
                                         double t_hi) {
  if (curve.points.size() < 10)
    throw FitError("estimate_diffusion_exponent: needs at least 10 checkpoints");
  const double t_min = static_cast<double>(curve.points.front().t);
  const double t_max = static_cast<double>(curve.points.back().t);
  if (t_max < 1000.0 * t_min)
    throw FitError("estimate_diffusion_exponent: curve must span at least 3 decades");
  if (t_lo < 0.0) t_lo = t_max / 100.0;  // default: the last two decades
  if (t_hi < 0.0) t_hi = t_max;

  std::vector<double> lnln_t, ln_t, ln_msd;
  for (const DiffusionPoint& p : curve.points) {
    const double t = static_cast<double>(p.t);
    if (t < t_lo || t > t_hi || t < 3.0 || p.msd <= 0.0) continue;
    lnln_t.push_back(std::log(std::log(t)));
    ln_t.push_back(std::log(t));
    ln_msd.push_back(std::log(p.msd));
  }
  if (lnln_t.size() < 3)
    throw FitError("estimate_diffusion_exponent: fewer than 3 usable points in window");

  const LineFit log_law = fit_line(lnln_t, ln_msd);
  const LineFit power_law = fit_line(ln_t, ln_msd);
  DiffusionFit fit;
  fit.p = log_law.slope;
  fit.p_r2 = log_law.r2;
  fit.gamma = power_law.slope;
  fit.gamma_r2 = power_law.r2;
  fit.n_points = lnln_t.size();
  fit.prefers_power_law = power_law.r2 > log_law.r2;
  return fit;
}

}  // namespace batchlab
