#include "batchlab/fit.hpp"

#include <algorithm>
#include <cmath>

#include "batchlab/error.hpp"

namespace batchlab {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw FitError("fit_line: x and y lengths differ");
  if (x.size() < 2) throw FitError("fit_line: need at least 2 points");
  const double n = static_cast<double>(x.size());

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
      throw FitError("fit_line: non-finite input");
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw FitError("fit_line: x has zero variance");

  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.n = x.size();
  if (syy > 0.0) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * x[i]);
      ss_res += r * r;
    }
    fit.r2 = 1.0 - ss_res / syy;
  } else {
    fit.r2 = 1.0;  // constant y is fit exactly by slope 0
  }
  return fit;
}

std::vector<std::uint64_t> log_spaced_times(std::uint64_t t_max, std::size_t n) {
  std::vector<std::uint64_t> ts;
  const double ln_max = std::log(static_cast<double>(t_max));
  for (std::size_t i = 0; i < n; ++i) {
    const double f = n > 1 ? std::exp(ln_max * static_cast<double>(i) / (n - 1)) : 1.0;
    std::uint64_t t = static_cast<std::uint64_t>(std::llround(f));
    t = std::max<std::uint64_t>(1, std::min(t, t_max));
    if (ts.empty() || t > ts.back()) ts.push_back(t);
  }
  if (ts.back() != t_max) ts.push_back(t_max);
  return ts;
}

}  // namespace batchlab
