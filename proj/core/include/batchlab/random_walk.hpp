#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

// One-dimensional quenched random potential on the integer lattice: V(0) = 0
// and V(x) - V(x-1) = delta_x with i.i.d. N(0, increment_std^2) increments,
// each generated from (seed, stream, edge) alone so values never depend on
// visit order. By construction E (V(x) - V(y))^2 = increment_std^2 |x - y|,
// i.e. a structure exponent of exactly 1. increment_std = 0 gives the flat
// potential (every move accepted).
//
// Metropolis acceptance probabilities per edge are cached on first touch,
// which keeps the per-step cost at one counter-RNG draw plus a compare.
class LatticeDisorder {
 public:
  LatticeDisorder(std::uint64_t seed, std::uint64_t stream, double increment_std,
                  double temperature);

  double increment(std::int64_t edge) const;  // delta_edge, edge connects (edge-1, edge)
  double value(std::int64_t site) const;      // V(site); O(|site|) on first touch

  // Acceptance for crossing `edge` upward (towards +inf) or downward.
  double accept_up(std::int64_t edge);
  double accept_down(std::int64_t edge);

  double increment_std() const { return std_; }
  double temperature() const { return temperature_; }

 private:
  struct Acc {
    double up, down;
  };
  Acc make_acc(std::int64_t edge) const;

  std::uint64_t seed_, stream_;
  double std_, temperature_;
  std::vector<Acc> pos_;  // edges 1, 2, ...
  std::vector<Acc> neg_;  // edges 0, -1, ...
  mutable std::vector<double> vpos_;  // V(1), V(2), ...
  mutable std::vector<double> vneg_;  // V(-1), V(-2), ...
};

// Random cosine-sum field L(w) = sum_k a_k cos(<omega_k, w> + phi_k) whose
// structure function E (L(w1) - L(w2))^2 grows as ||w1 - w2||^alpha over the
// band of length scales [1/freq_max, 1/freq_min]: frequency magnitudes are
// log-uniform and the squared amplitudes fall off as |omega|^(-alpha).
struct FourierField {
  std::size_t dim = 1;
  double alpha = 1.0;
  Tensor omega;  // [K x dim]
  Tensor amp;    // [K]
  Tensor phase;  // [K]

  double value(const double* w) const;
  double value(const Tensor& w) const;
  void gradient(const double* w, double* out) const;
};

// Draws a field with K features, amplitudes normalized so that
// sum_k a_k^2 = amplitude^2 (the structure function saturates near
// 2 * amplitude^2). alpha must lie in (0, 2).
FourierField make_fourier_field(Rng& rng, std::size_t dim, double alpha,
                                std::size_t features, double amplitude,
                                double freq_min, double freq_max);

enum class WalkDynamics { metropolis_lattice, langevin_continuous };

const char* to_string(WalkDynamics dynamics);

struct WalkConfig {
  WalkDynamics dynamics = WalkDynamics::metropolis_lattice;
  std::size_t n_walkers = 1000;
  std::uint64_t t_max = 1000000;
  std::size_t checkpoints = 40;  // logarithmically spaced in [1, t_max]
  double temperature = 1.0;
  std::uint64_t seed = 1;

  // metropolis_lattice
  double increment_std = 1.0;

  // langevin_continuous on a FourierField; each walker gets its own
  // disorder realization (fresh frequencies, amplitudes and phases).
  std::size_t dim = 1;
  double alpha = 1.0;
  std::size_t features = 256;
  double amplitude = 4.0;
  double freq_min = 1.0 / 30.0;
  double freq_max = 30.0;
  double step_size = 0.01;
};

struct DiffusionPoint {
  std::uint64_t t = 0;
  double msd = 0.0;      // mean over walkers of ||x_t - x_0||^2
  double std_err = 0.0;  // standard error of that mean
};

struct DiffusionCurve {
  std::vector<DiffusionPoint> points;
  WalkConfig config;
};

// Ensemble- and disorder-averaged mean squared displacement at
// log-spaced checkpoints. Walkers run in parallel; each owns its RNG
// stream and its disorder realization, and the aggregation order is
// fixed, so the curve is a pure function of the config.
DiffusionCurve run_diffusion_experiment(const WalkConfig& config);

// CSV with header t,msd,stderr,n_walkers,alpha,dynamics. The alpha column
// carries the structure exponent of the disorder: 1 for the lattice
// potential, 0 when it is flat, the field's alpha for Langevin runs.
void save_diffusion_csv(const DiffusionCurve& curve, const std::string& path);
DiffusionCurve load_diffusion_csv(const std::string& path);

struct StructurePoint {
  double r = 0.0;
  double value = 0.0;    // E (L(w1) - L(w2))^2 at separation r
  double std_err = 0.0;
};

// Disorder-averaged lattice structure function at integer separations,
// over n_samples independent increment streams. Expected value is
// increment_std^2 * r exactly.
std::vector<StructurePoint> lattice_structure_function(
    std::uint64_t seed, double increment_std, const std::vector<std::int64_t>& distances,
    std::size_t n_samples);

// Monte-Carlo structure function of a fixed field over random point pairs
// at each separation: base points Gaussian, offset directions uniform on
// the sphere. n_pairs >= 1000.
std::vector<StructurePoint> structure_function(const FourierField& field,
                                               const std::vector<double>& distances,
                                               std::size_t n_pairs, Rng& rng);

struct DiffusionFit {
  double p = 0.0;        // slope of ln MSD on ln ln t   (MSD ~ (ln t)^p)
  double p_r2 = 0.0;
  double gamma = 0.0;    // slope of ln MSD on ln t      (MSD ~ t^gamma)
  double gamma_r2 = 0.0;
  std::size_t n_points = 0;
  bool prefers_power_law = false;  // gamma_r2 > p_r2
};

// Fits both growth laws on checkpoints with t >= t_lo (and t >= 3 so that
// ln ln t is positive), t <= t_hi, msd > 0. The curve itself must have at
// least 10 checkpoints spanning 3 decades. Default window: the last two
// decades of the curve.
DiffusionFit estimate_diffusion_exponent(const DiffusionCurve& curve, double t_lo = -1.0,
                                         double t_hi = -1.0);

}  // namespace batchlab
