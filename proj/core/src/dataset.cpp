#include "batchlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "batchlab/error.hpp"

namespace batchlab {

void validate_dataset(const Dataset& ds) {
  if (ds.labels.empty()) throw ParameterError("dataset: empty");
  if (ds.inputs.rank() != 2 || ds.inputs.rows() != ds.labels.size())
    throw ConsistencyError("dataset: inputs/labels row count disagree");
  if (ds.num_classes < 2) throw ParameterError("dataset: need at least two classes");
  for (int y : ds.labels)
    if (y < 0 || y >= ds.num_classes) throw ConsistencyError("dataset: label out of range");
  require_finite(ds.inputs, "dataset inputs");
}

double min_margin(const Tensor& inputs, const std::vector<int>& labels, const Tensor& u) {
  if (inputs.rank() != 2 || inputs.rows() != labels.size())
    throw DimensionError("min_margin: inputs/labels disagree");
  if (u.size() != inputs.cols()) throw DimensionError("min_margin: direction dimension");
  const double norm = l2_norm(u);
  if (norm == 0.0) throw ParameterError("min_margin: zero direction");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < inputs.rows(); ++i) {
    const double* x = inputs.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) s += u[j] * x[j];
    worst = std::min(worst, labels[i] * s / norm);
  }
  return worst;
}

BatchSampler::BatchSampler(SampleMode mode, std::size_t population, std::size_t batch, Rng rng)
    : mode_(mode), n_(population), m_(batch), rng_(rng) {
  if (n_ == 0) throw ParameterError("sampler: empty population");
  if (m_ == 0 || m_ > n_) throw ParameterError("sampler: need 1 <= batch <= population");
  if (mode_ == SampleMode::without_replacement) {
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    reshuffle();
  }
}

void BatchSampler::reshuffle() {
  // Fisher-Yates against our own stream; std::shuffle's draw pattern is not
  // pinned by the standard.
  for (std::size_t i = n_; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng_.next_below(i));
    std::swap(perm_[i - 1], perm_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next_batch() {
  std::vector<std::size_t> out;
  if (mode_ == SampleMode::with_replacement) {
    out.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) out[i] = static_cast<std::size_t>(rng_.next_below(n_));
    return out;
  }
  if (cursor_ >= n_) reshuffle();
  const std::size_t take = std::min(m_, n_ - cursor_);
  out.assign(perm_.begin() + static_cast<std::ptrdiff_t>(cursor_),
             perm_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
  cursor_ += take;
  return out;
}

SeparableDataset make_separable(Rng& rng, std::size_t n, std::size_t d, double margin) {
  if (n < 2) throw ParameterError("make_separable: need at least 2 points");
  if (d < 2) throw ParameterError("make_separable: need at least 2 dimensions");
  if (!(margin > 0.0)) throw ParameterError("make_separable: margin must be positive");

  for (int attempt = 0; attempt < 64; ++attempt) {
    // Unit witness direction.
    Tensor u = gaussian(rng, {d}, 0.0, 1.0);
    double norm = l2_norm(u);
    if (norm < 1e-8) continue;
    scale_in_place(u, 1.0 / norm);

    Tensor x = Tensor::zeros({n, d});
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // First two points get opposite labels so both classes always appear.
      y[i] = (i < 2) ? (i == 0 ? 1 : -1) : (rng.next_below(2) == 0 ? 1 : -1);
      // Start from an isotropic cloud, then pin the component along u to
      // y * (margin + slack): the margin holds by construction.
      double* xi = x.row(i);
      double along = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        xi[j] = rng.normal();
        along += xi[j] * u[j];
      }
      const double want = y[i] * (margin + rng.uniform(0.0, 1.0));
      for (std::size_t j = 0; j < d; ++j) xi[j] += (want - along) * u[j];
    }
    if (min_margin(x, y, u) >= margin * (1.0 - 1e-12)) {
      SeparableDataset out;
      out.inputs = std::move(x);
      out.labels = std::move(y);
      out.margin = margin;
      out.witness = std::move(u);
      return out;
    }
  }
  throw ParameterError("make_separable: could not verify separability");
}

Dataset make_gaussian_blobs(Rng& rng, std::size_t n, std::size_t d, int num_classes,
                            double spread) {
  if (num_classes < 2) throw ParameterError("make_gaussian_blobs: need >= 2 classes");
  if (n == 0) throw ParameterError("make_gaussian_blobs: empty");
  if (spread < 0.0) throw ParameterError("make_gaussian_blobs: negative spread");
  const std::size_t axes_needed = (static_cast<std::size_t>(num_classes) + 1) / 2;
  if (d < axes_needed)
    throw ParameterError("make_gaussian_blobs: dimension too small for distinct centers");

  Dataset ds;
  ds.inputs = Tensor::zeros({n, d});
  ds.labels.resize(n);
  ds.num_classes = num_classes;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(num_classes));
    ds.labels[i] = c;
    double* xi = ds.inputs.row(i);
    if (spread > 0.0)
      for (std::size_t j = 0; j < d; ++j) xi[j] = spread * rng.normal();
    xi[static_cast<std::size_t>(c / 2)] += (c % 2 == 0) ? 1.0 : -1.0;
  }
  return ds;
}

Dataset make_synthetic_images(std::uint64_t seed, std::size_t n, std::size_t side,
                              int num_classes) {
  if (num_classes < 2) throw ParameterError("make_synthetic_images: need >= 2 classes");
  if (n == 0) throw ParameterError("make_synthetic_images: empty");
  if (side < 8) throw ParameterError("make_synthetic_images: side too small");

  const std::size_t d = side * side;
  Rng master(seed, 0xD16175ull);

  // Per-class template: a sum of random soft blobs, normalized to [0,1].
  std::vector<std::vector<double>> templates(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Rng tr = master.child(static_cast<std::uint64_t>(c));
    std::vector<double>& t = templates[static_cast<std::size_t>(c)];
    t.assign(d, 0.0);
    const int blobs = 3 + static_cast<int>(tr.next_below(3));
    for (int b = 0; b < blobs; ++b) {
      const double cx = tr.uniform(0.2, 0.8) * static_cast<double>(side);
      const double cy = tr.uniform(0.2, 0.8) * static_cast<double>(side);
      const double w = tr.uniform(1.5, 4.0);
      const double amp = tr.uniform(0.5, 1.0) * (tr.next_below(4) == 0 ? -1.0 : 1.0);
      for (std::size_t yy = 0; yy < side; ++yy)
        for (std::size_t xx = 0; xx < side; ++xx) {
          const double dx = (static_cast<double>(xx) - cx) / w;
          const double dy = (static_cast<double>(yy) - cy) / w;
          t[yy * side + xx] += amp * std::exp(-0.5 * (dx * dx + dy * dy));
        }
    }
    double lo = t[0], hi = t[0];
    for (double v : t) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double span = (hi > lo) ? hi - lo : 1.0;
    for (double& v : t) v = (v - lo) / span;
  }

  Dataset ds;
  ds.inputs = Tensor::zeros({n, d});
  ds.labels.resize(n);
  ds.num_classes = num_classes;
  Rng sample_root = master.child(0x5A17ull);
  for (std::size_t i = 0; i < n; ++i) {
    Rng sr = sample_root.child(i);
    const int c = static_cast<int>(sr.next_below(static_cast<std::uint64_t>(num_classes)));
    ds.labels[i] = c;
    const std::vector<double>& t = templates[static_cast<std::size_t>(c)];
    const double contrast = sr.uniform(0.85, 1.15);
    const int max_shift = static_cast<int>(side / 14);  // +-1 at 16px, +-2 at 28px
    const int span = 2 * max_shift + 1;
    const int shift_x = static_cast<int>(sr.next_below(static_cast<std::uint64_t>(span))) - max_shift;
    const int shift_y = static_cast<int>(sr.next_below(static_cast<std::uint64_t>(span))) - max_shift;
    double* xi = ds.inputs.row(i);
    for (std::size_t yy = 0; yy < side; ++yy)
      for (std::size_t xx = 0; xx < side; ++xx) {
        const long sx = static_cast<long>(xx) - shift_x;
        const long sy = static_cast<long>(yy) - shift_y;
        double v = 0.0;
        if (sx >= 0 && sy >= 0 && sx < static_cast<long>(side) && sy < static_cast<long>(side))
          v = t[static_cast<std::size_t>(sy) * side + static_cast<std::size_t>(sx)];
        v = contrast * v + 0.06 * sr.normal();
        v = std::min(1.0, std::max(0.0, v));
        // Quantize to 8-bit gray so IDX round trips are exact.
        xi[yy * side + xx] = std::round(v * 255.0) / 255.0;
      }
  }
  return ds;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  validate_dataset(ds);
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_dataset_csv: cannot open " + path);
  const std::size_t d = ds.dim();
  for (std::size_t j = 0; j < d; ++j) out << "x" << j << ",";
  out << "label\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double* x = ds.inputs.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", x[j]);
      out << buf << ",";
    }
    out << ds.labels[i] << "\n";
  }
  if (!out) throw IoError("save_dataset_csv: write failed for " + path);
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("load_dataset_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> cols;
  std::stringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) cols.push_back(tok);
  if (cols.empty() || cols.back() != "label")
    throw FormatError("load_dataset_csv: header must end with 'label'");
  const std::size_t d = cols.size() - 1;
  if (d == 0) throw FormatError("load_dataset_csv: no feature columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::size_t got = 0;
    while (std::getline(ls, tok, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw FormatError("load_dataset_csv: bad number at line " + std::to_string(line_no));
      if (got < d)
        values.push_back(v);
      else
        labels.push_back(static_cast<int>(v));
      ++got;
    }
    if (got != d + 1)
      throw FormatError("load_dataset_csv: wrong column count at line " +
                        std::to_string(line_no));
  }
  if (labels.empty()) throw FormatError("load_dataset_csv: no data rows");

  Dataset ds;
  ds.inputs = Tensor({labels.size(), d}, std::move(values));
  ds.labels = std::move(labels);
  int top = 0;
  for (int y : ds.labels) top = std::max(top, y);
  ds.num_classes = std::max(2, top + 1);
  validate_dataset(ds);
  return ds;
}

Dataset subset_shuffled(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  validate_dataset(ds);
  if (k == 0 || k > ds.size()) throw ParameterError("subset_shuffled: bad subset size");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, 0x5B5E7ull);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
  Dataset out;
  out.inputs = Tensor::zeros({k, ds.dim()});
  out.labels.resize(k);
  out.num_classes = ds.num_classes;
  for (std::size_t i = 0; i < k; ++i) {
    std::memcpy(out.inputs.row(i), ds.inputs.row(order[i]), ds.dim() * sizeof(double));
    out.labels[i] = ds.labels[order[i]];
  }
  return out;
}

}  // namespace batchlab
