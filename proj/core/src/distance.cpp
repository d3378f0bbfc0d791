#include "batchlab/distance.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "batchlab/error.hpp"
#include "batchlab/rng.hpp"

namespace batchlab {

void validate_series(const DistanceSeries& series) {
  for (std::size_t i = 0; i < series.entries.size(); ++i) {
    const DistanceEntry& e = series.entries[i];
    if (!(e.distance >= 0.0))
      throw ConsistencyError("distance series: negative or NaN distance");
    if (i > 0 && e.t <= series.entries[i - 1].t)
      throw ConsistencyError("distance series: t must be strictly increasing");
    if (e.t == 0 && e.distance != 0.0)
      throw ConsistencyError("distance series: t=0 entry must sit at distance 0");
  }
}

LogFit fit_log_distance(const DistanceSeries& series, double t_min, double t_max) {
  validate_series(series);
  const double lo = t_min < 0.0 ? 2.0 : t_min;
  const double hi = t_max < 0.0 ? std::numeric_limits<double>::infinity() : t_max;

  std::vector<double> ln_t, d, lnln_t, ln_d;
  for (const DistanceEntry& e : series.entries) {
    const double t = static_cast<double>(e.t);
    if (t < lo || t > hi || e.t < 2 || !(e.distance > 0.0)) continue;
    ln_t.push_back(std::log(t));
    d.push_back(e.distance);
    lnln_t.push_back(std::log(std::log(t)));
    ln_d.push_back(std::log(e.distance));
  }
  if (ln_t.size() < 10)
    throw FitError("fit_log_distance: needs >= 10 window points with t >= 2, d > 0");

  const LineFit lin = fit_line(ln_t, d);
  const LineFit ll = fit_line(lnln_t, ln_d);
  if (!(ll.slope > 0.0))
    throw FitError("fit_log_distance: distance does not grow over the window");

  LogFit fit;
  fit.a = lin.intercept;
  fit.b = lin.slope;
  fit.r_squared = lin.r2;
  fit.alpha_hat = 2.0 / ll.slope;
  fit.window_lo = lo;
  fit.window_hi = hi;
  fit.n_points = ln_t.size();
  return fit;
}

DistanceSeries random_walk_distance_series(std::uint64_t seed, std::uint64_t t_max,
                                           std::size_t dim, std::size_t n_points) {
  if (dim < 1) throw ParameterError("random_walk_distance_series: dim must be >= 1");
  if (t_max < 1) throw ParameterError("random_walk_distance_series: t_max must be >= 1");
  if (n_points < 2)
    throw ParameterError("random_walk_distance_series: needs >= 2 points");

  const std::vector<std::uint64_t> cks = log_spaced_times(t_max, n_points);
  Rng rng(seed);
  std::vector<double> w(dim, 0.0);
  DistanceSeries series;
  std::size_t next = 0;
  for (std::uint64_t t = 1; t <= t_max && next < cks.size(); ++t) {
    for (std::size_t j = 0; j < dim; ++j) w[j] += rng.normal();
    if (t == cks[next]) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += w[j] * w[j];
      DistanceEntry e;
      e.t = t;
      e.distance = std::sqrt(s);
      series.entries.push_back(e);
      ++next;
    }
  }
  return series;
}

void save_distance_csv(const DistanceSeries& series, const std::string& path) {
  validate_series(series);
  std::ofstream out(path, std::ios::binary);  // binary: keep LF on every platform
  if (!out) throw IoError("save_distance_csv: cannot open " + path);
  out << "t,distance,train_loss,val_error\n";
  char buf[32];
  for (const DistanceEntry& e : series.entries) {
    out << e.t << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.distance);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", e.train_loss);
    out << buf << ",";
    if (e.has_val) {
      std::snprintf(buf, sizeof(buf), "%.17g", e.val_error);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("save_distance_csv: write failed for " + path);
}

DistanceSeries load_distance_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_distance_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("load_distance_csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,distance,train_loss,val_error")
    throw FormatError("load_distance_csv: unexpected header: " + line);

  DistanceSeries series;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string tok;
    std::stringstream ss(line);
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() == 3 && line.back() == ',') cols.push_back("");
    if (cols.size() != 4) throw FormatError("load_distance_csv: expected 4 columns");
    try {
      DistanceEntry e;
      e.t = std::stoull(cols[0]);
      e.distance = std::stod(cols[1]);
      e.train_loss = std::stod(cols[2]);
      if (!cols[3].empty()) {
        e.val_error = std::stod(cols[3]);
        e.has_val = true;
      }
      series.entries.push_back(e);
    } catch (const std::invalid_argument&) {
      throw FormatError("load_distance_csv: malformed row: " + line);
    } catch (const std::out_of_range&) {
      throw FormatError("load_distance_csv: value out of range: " + line);
    }
  }
  validate_series(series);
  return series;
}

}  // namespace batchlab
