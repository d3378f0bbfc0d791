#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/dataset.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

// Separators here are always through the origin (no bias term), so the
// SeparableDataset margin/witness fields are advisory only.

// min_n y_n <u, x_n>; u is used as given (callers pass unit vectors).
double margin_of(const SeparableDataset& data, const Tensor& u);

struct MaxMargin {
  Tensor w_hat;   // unit norm
  double margin;  // margin_of(data, w_hat)
};

// Exact hard-margin separator for desk-scale problems (d in {2,3}, N <= 50):
// enumerates candidate support sets of size 1..d, solves the equal-margin
// system G a = 1 on each, keeps KKT-feasible candidates (a >= 0, every point
// at margin >= 1), and returns the feasible w of minimum norm, normalized.
// Throws DimensionError / SizeError on shape limits, ParameterError on labels
// outside {-1,+1}, InfeasibleError when no separator through the origin exists.
MaxMargin max_margin_oracle(const SeparableDataset& data);

struct MarginEntry {
  std::uint64_t t = 0;
  double norm = 0.0;
  double cosine = 0.0;
  double margin = 0.0;  // margin of w_t / |w_t|
};

struct MarginTrace {
  std::vector<MarginEntry> entries;
  Tensor w_hat;
  double oracle_margin = 0.0;
};

// Plain gradient descent on the mean logistic loss from w = 0, no
// regularization, traced at log-spaced steps against the oracle direction.
// Throws NumericError if the loss or the iterate stops being finite.
MarginTrace run_margin_experiment(const SeparableDataset& data, double lr,
                                  std::uint64_t t_max, std::size_t checkpoints = 40);

// CSV schema: t,norm,cosine,margin.
void save_margin_csv(const MarginTrace& trace, const std::string& path);

}  // namespace batchlab
