#include "batchlab/ray_scan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "batchlab/error.hpp"

namespace batchlab {

std::vector<RayScanRecord> random_ray_scan(const Tensor& w0,
                                           const std::function<double(const Tensor&)>& loss_at,
                                           double c, std::size_t n_repeats, Rng& rng) {
  if (!(c >= 0.0)) throw ParameterError("random_ray_scan: c must be >= 0");
  if (n_repeats < 1) throw ParameterError("random_ray_scan: n_repeats must be >= 1");
  const std::size_t p = w0.size();
  if (p == 0) throw DimensionError("random_ray_scan: empty parameter vector");

  std::vector<RayScanRecord> records;
  records.reserve(n_repeats);
  Tensor w = w0;
  std::vector<double> v(p);
  for (std::size_t i = 0; i < n_repeats; ++i) {
    Rng stream = rng.child(i);
    double norm = 0.0;
    do {
      for (std::size_t j = 0; j < p; ++j) v[j] = stream.normal();
      norm = l2_norm(v.data(), p);
    } while (norm < 1e-12);
    const double z = stream.uniform(0.0, c);
    for (std::size_t j = 0; j < p; ++j) w[j] = w0[j] + z * (v[j] / norm);
    records.push_back({z, loss_at(w)});
  }
  return records;
}

std::vector<BinnedStd> binned_loss_std(const std::vector<RayScanRecord>& records,
                                       std::size_t bins, double loss_w0) {
  if (bins < 2) throw ParameterError("binned_loss_std: needs at least 2 bins");
  if (records.empty()) throw SizeError("binned_loss_std: no records");
  double r_min = records[0].distance, r_max = records[0].distance;
  for (const RayScanRecord& r : records) {
    if (!std::isfinite(r.distance) || !std::isfinite(r.loss))
      throw NumericError("binned_loss_std: non-finite record");
    r_min = std::min(r_min, r.distance);
    r_max = std::max(r_max, r.distance);
  }
  if (r_min == r_max)
    throw ConsistencyError("binned_loss_std: all records at a single distance");

  const double width = r_max / static_cast<double>(bins);
  std::vector<std::vector<double>> sq(bins);
  for (const RayScanRecord& r : records) {
    std::size_t b = static_cast<std::size_t>(r.distance / width);
    b = std::min(b, bins - 1);
    const double d = r.loss - loss_w0;
    sq[b].push_back(d * d);
  }

  // Merge an empty bin into the one after it; empties at the tail fold back
  // into the last group. Values are summed in sorted order so the result does
  // not depend on record order.
  struct Group {
    double lo, hi;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  double group_lo = 0.0;
  std::vector<double> pending;
  for (std::size_t b = 0; b < bins; ++b) {
    pending.insert(pending.end(), sq[b].begin(), sq[b].end());
    const double hi = (b + 1 == bins) ? r_max : width * static_cast<double>(b + 1);
    if (!pending.empty()) {
      groups.push_back({group_lo, hi, std::move(pending)});
      pending.clear();
      group_lo = hi;
    }
  }
  if (groups.empty()) throw ConsistencyError("binned_loss_std: no occupied bins");
  groups.back().hi = r_max;

  std::vector<BinnedStd> out;
  out.reserve(groups.size());
  for (Group& g : groups) {
    std::sort(g.values.begin(), g.values.end());
    double s = 0.0;
    for (double x : g.values) s += x;
    BinnedStd b;
    b.center = 0.5 * (g.lo + g.hi);
    b.value = std::sqrt(s / static_cast<double>(g.values.size()));
    b.count = g.values.size();
    out.push_back(b);
  }
  return out;
}

void save_ray_csv(const std::vector<RayScanRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_ray_csv: cannot open " + path);
  out << "distance,loss\n";
  char buf[32];
  for (const RayScanRecord& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.distance);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.loss);
    out << buf << "\n";
  }
  if (!out) throw IoError("save_ray_csv: write failed for " + path);
}

void save_binned_csv(const std::vector<BinnedStd>& bins, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_binned_csv: cannot open " + path);
  out << "bin_center,std\n";
  char buf[32];
  for (const BinnedStd& b : bins) {
    std::snprintf(buf, sizeof(buf), "%.17g", b.center);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", b.value);
    out << buf << "\n";
  }
  if (!out) throw IoError("save_binned_csv: write failed for " + path);
}

}  // namespace batchlab
