#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/fit.hpp"

namespace batchlab {

// Weight distance from the starting point, logged while training runs.
struct DistanceEntry {
  std::uint64_t t = 0;
  double distance = 0.0;
  double train_loss = 0.0;
  double val_error = 0.0;
  bool has_val = false;
};

struct DistanceSeries {
  std::vector<DistanceEntry> entries;
};

// Throws ConsistencyError unless t is strictly increasing, distances are
// non-negative, and a t=0 entry (if any) sits at distance 0.
void validate_series(const DistanceSeries& series);

// d ~ a + b ln t on the window, plus the exponent view: alpha_hat = 2/s where
// s is the slope of ln d on ln ln t. Window bounds are inclusive; negative
// bounds mean "no bound". Only entries with t >= 2 and d > 0 can enter either
// regression; fewer than 10 such entries, or a non-increasing ln-ln fit, is a
// FitError.
struct LogFit {
  double a = 0.0;
  double b = 0.0;
  double r_squared = 0.0;
  double alpha_hat = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  std::size_t n_points = 0;
};

LogFit fit_log_distance(const DistanceSeries& series, double t_min = -1.0,
                        double t_max = -1.0);

// Control series: n_points log-spaced checkpoints of |sum of i.i.d. standard
// Gaussian steps| in `dim` dimensions, so distance grows like sqrt(t).
DistanceSeries random_walk_distance_series(std::uint64_t seed, std::uint64_t t_max,
                                           std::size_t dim, std::size_t n_points);

// CSV schema: t,distance,train_loss,val_error with val_error left empty for
// entries that have none.
void save_distance_csv(const DistanceSeries& series, const std::string& path);
DistanceSeries load_distance_csv(const std::string& path);

}  // namespace batchlab
