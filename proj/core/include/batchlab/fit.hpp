#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace batchlab {

// Ordinary least squares of y on x: y ~ intercept + slope * x.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

// Throws FitError on fewer than 2 points, mismatched lengths, or zero
// variance in x. A perfectly constant y fits exactly (r2 = 1).
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// n logarithmically spaced integer times in [1, t_max], deduplicated,
// always ending exactly at t_max.
std::vector<std::uint64_t> log_spaced_times(std::uint64_t t_max, std::size_t n);

}  // namespace batchlab
