#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

namespace batchlab {

// Labeled training set: N rows of d features plus integer class labels.
struct Dataset {
  Tensor inputs;            // [N x d]
  std::vector<int> labels;  // values in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
};

// Throws unless labels/inputs agree in count, labels are in range and N >= 1.
void validate_dataset(const Dataset& ds);

// Binary-labeled set guaranteed linearly separable with the given margin;
// `witness` is a unit vector u with labels[n] * <u, x_n> >= margin for all n.
struct SeparableDataset {
  Tensor inputs;            // [N x d]
  std::vector<int> labels;  // +1 / -1
  double margin = 0.0;
  Tensor witness;  // [d]
};

// min_n labels[n] * <u, x_n> / |u| — the functional margin of direction u.
double min_margin(const Tensor& inputs, const std::vector<int>& labels, const Tensor& u);

enum class SampleMode { with_replacement, without_replacement };

// Mini-batch index source.
//
// with_replacement draws M i.i.d. uniform indices (a multiset, the classical
// bootstrap batch); without_replacement walks a fresh uniform permutation
// each epoch, so every index appears exactly once per epoch and the final
// batch of an epoch may be short when M does not divide N.
class BatchSampler {
 public:
  BatchSampler(SampleMode mode, std::size_t population, std::size_t batch, Rng rng);

  std::vector<std::size_t> next_batch();

  SampleMode mode() const { return mode_; }
  std::size_t population() const { return n_; }
  std::size_t batch_size() const { return m_; }

 private:
  void reshuffle();

  SampleMode mode_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::size_t cursor_ = 0;
  Rng rng_;
  std::vector<std::size_t> perm_;
};

// Two linearly separable clusters of N points in d dimensions with verified
// margin under a randomly drawn unit witness. Bounded retries, then throws.
SeparableDataset make_separable(Rng& rng, std::size_t n, std::size_t d, double margin);

// Class-conditional isotropic Gaussians. Class c sits at (+/-)e_{c/2+1}:
// class 0 -> +e1, class 1 -> -e1, class 2 -> +e2, ... Labels cycle i mod C,
// so balanced N gives equal counts per class.
Dataset make_gaussian_blobs(Rng& rng, std::size_t n, std::size_t d, int num_classes,
                            double spread);

// Synthetic 10-class image set: smooth seeded class templates plus per-sample
// shift, contrast and pixel noise, quantized to 256 gray levels so a round
// trip through 8-bit image files is lossless. Stand-in corpus for training
// experiments when no real image data is on disk.
Dataset make_synthetic_images(std::uint64_t seed, std::size_t n, std::size_t side = 28,
                              int num_classes = 10);

// CSV with header x0,...,x{d-1},label. %.17g floats, LF line endings.
void save_dataset_csv(const Dataset& ds, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

// First k rows after a seeded uniform shuffle (the desk-scale subset rule).
Dataset subset_shuffled(const Dataset& ds, std::size_t k, std::uint64_t seed);

}  // namespace batchlab
