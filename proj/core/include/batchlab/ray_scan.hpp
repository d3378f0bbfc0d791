#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

struct RayScanRecord {
  double distance = 0.0;
  double loss = 0.0;
};

// Random-ray loss probe around w0: each repeat draws a uniform unit direction
// v (normalized Gaussian), a radius z uniform in [0, c], and records
// (z, loss_at(w0 + z v)). Each repeat consumes its own child stream of rng, so
// the output is independent of evaluation order. c = 0 degenerates to probing
// w0 itself. Throws ParameterError on c < 0 or n_repeats < 1.
std::vector<RayScanRecord> random_ray_scan(const Tensor& w0,
                                           const std::function<double(const Tensor&)>& loss_at,
                                           double c, std::size_t n_repeats, Rng& rng);

struct BinnedStd {
  double center = 0.0;
  double value = 0.0;  // root mean square of loss - loss_w0 in the bin
  std::size_t count = 0;
};

// Equal-width bins over [0, max distance]; a bin with no records is merged
// into the next one (trailing empties merge backwards). Bin contents are
// accumulated in sorted order, so the result is independent of record order.
// Throws ParameterError (bins < 2), SizeError (no records), ConsistencyError
// (all records at one distance).
std::vector<BinnedStd> binned_loss_std(const std::vector<RayScanRecord>& records,
                                       std::size_t bins, double loss_w0);

// CSV schemas: distance,loss and bin_center,std.
void save_ray_csv(const std::vector<RayScanRecord>& records, const std::string& path);
void save_binned_csv(const std::vector<BinnedStd>& bins, const std::string& path);

}  // namespace batchlab
