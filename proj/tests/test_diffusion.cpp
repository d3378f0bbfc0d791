#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#include "batchlab/distance.hpp"
#include "batchlab/error.hpp"
#include "batchlab/fit.hpp"
#include "batchlab/margin.hpp"
#include "batchlab/ray_scan.hpp"
#include "batchlab/rng.hpp"
#include "batchlab/tensor.hpp"

using batchlab::DistanceEntry;
using batchlab::DistanceSeries;
using batchlab::RayScanRecord;
using batchlab::Rng;
using batchlab::SeparableDataset;
using batchlab::Tensor;

namespace {

DistanceSeries synthetic_series(double (*law)(double), std::uint64_t t_lo,
                                std::uint64_t t_hi, std::size_t n) {
  DistanceSeries s;
  const double la = std::log(static_cast<double>(t_lo));
  const double lb = std::log(static_cast<double>(t_hi));
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = la + (lb - la) * static_cast<double>(i) / (n - 1);
    std::uint64_t t = static_cast<std::uint64_t>(std::llround(std::exp(f)));
    if (t <= prev) t = prev + 1;
    prev = t;
    DistanceEntry e;
    e.t = t;
    e.distance = law(static_cast<double>(t));
    s.entries.push_back(e);
  }
  return s;
}

SeparableDataset two_point_dataset() {
  SeparableDataset d;
  d.inputs = Tensor({2, 2}, {1.0, 1.0, -1.0, -1.0});
  d.labels = {1, -1};
  return d;
}

// Random labeled points kept away from the separating plane through 0.
SeparableDataset seeded_dataset(std::uint64_t seed, std::size_t n, std::size_t dim) {
  Rng rng(seed);
  std::vector<double> u(dim);
  double un = 0.0;
  for (std::size_t j = 0; j < dim; ++j) u[j] = rng.normal();
  for (std::size_t j = 0; j < dim; ++j) un += u[j] * u[j];
  un = std::sqrt(un);

  SeparableDataset d;
  d.inputs = Tensor::zeros({n, dim});
  d.labels.assign(n, 0);
  std::size_t got = 0;
  while (got < n) {
    std::vector<double> x(dim);
    double z = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = rng.normal();
      z += x[j] * u[j] / un;
    }
    if (std::abs(z) < 0.3) continue;
    for (std::size_t j = 0; j < dim; ++j) d.inputs.at(got, j) = x[j];
    d.labels[got] = z > 0.0 ? 1 : -1;
    ++got;
  }
  return d;
}

}  // namespace

TEST_CASE("log-distance fits recover exact synthetic laws") {
  DistanceSeries lin = synthetic_series(+[](double t) { return 3.0 + 2.0 * std::log(t); },
                                        2, 1000000, 25);
  batchlab::LogFit f = batchlab::fit_log_distance(lin);
  CHECK(f.a == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.b == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r_squared >= 1.0 - 1e-12);
  CHECK(f.n_points == 25);

  DistanceSeries sq = synthetic_series(
      +[](double t) { return std::pow(std::log(t), 2.0); }, 2, 1000000, 25);
  CHECK(batchlab::fit_log_distance(sq).alpha_hat == doctest::Approx(1.0).epsilon(1e-6));

  DistanceSeries pure = synthetic_series(+[](double t) { return std::log(t); }, 2,
                                         1000000, 25);
  batchlab::LogFit fp = batchlab::fit_log_distance(pure);
  CHECK(fp.alpha_hat == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(fp.a == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fp.b == doctest::Approx(1.0).epsilon(1e-12));

  // Window bounds select the late segment of a kinked series.
  DistanceSeries kinked = synthetic_series(
      +[](double t) { return t < 1000.0 ? 5.0 * std::log(t) : 2.0 * std::log(t) + 3.0 * std::log(1000.0); },
      2, 1000000, 40);
  batchlab::LogFit late = batchlab::fit_log_distance(kinked, 1000.0);
  CHECK(late.b == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(late.n_points < kinked.entries.size());
}

TEST_CASE("log-distance fit rejects degenerate input") {
  DistanceSeries s = synthetic_series(+[](double t) { return std::log(t); }, 2, 100, 9);
  CHECK_THROWS_AS(batchlab::fit_log_distance(s), batchlab::FitError);

  DistanceSeries flat = synthetic_series(+[](double) { return 1.0; }, 2, 100000, 15);
  CHECK_THROWS_AS(batchlab::fit_log_distance(flat), batchlab::FitError);

  DistanceSeries zeros = synthetic_series(+[](double) { return 0.0; }, 2, 100000, 15);
  CHECK_THROWS_AS(batchlab::fit_log_distance(zeros), batchlab::FitError);

  DistanceSeries bad;
  bad.entries.push_back({10, 1.0, 0.0, 0.0, false});
  bad.entries.push_back({10, 1.1, 0.0, 0.0, false});
  CHECK_THROWS_AS(batchlab::validate_series(bad), batchlab::ConsistencyError);

  DistanceSeries origin;
  origin.entries.push_back({0, 0.5, 0.0, 0.0, false});
  CHECK_THROWS_AS(batchlab::validate_series(origin), batchlab::ConsistencyError);
}

TEST_CASE("aimless-walk control grows as sqrt(t)") {
  DistanceSeries s = batchlab::random_walk_distance_series(5u, 10000, 64, 40);
  REQUIRE(s.entries.size() >= 30);
  std::vector<double> ln_t, ln_d;
  for (const DistanceEntry& e : s.entries) {
    if (e.t < 2) continue;
    ln_t.push_back(std::log(static_cast<double>(e.t)));
    ln_d.push_back(std::log(e.distance));
  }
  batchlab::LineFit fit = batchlab::fit_line(ln_t, ln_d);
  CHECK(fit.slope == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(fit.slope - 0.5) < 0.05);

  DistanceSeries again = batchlab::random_walk_distance_series(5u, 10000, 64, 40);
  REQUIRE(again.entries.size() == s.entries.size());
  for (std::size_t i = 0; i < s.entries.size(); ++i)
    CHECK(again.entries[i].distance == s.entries[i].distance);
}

TEST_CASE("ray scan: unit directions, exact radii, degenerate c") {
  Tensor w0 = Tensor::full({30}, 0.5);
  Rng rng(11u);
  // Loss equal to the distance itself pins |v| = 1 through |z v| = z.
  auto dist_loss = [&](const Tensor& w) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double d = w[j] - w0[j];
      s += d * d;
    }
    return std::sqrt(s);
  };
  auto records = batchlab::random_ray_scan(w0, dist_loss, 10.0, 2000, rng);
  REQUIRE(records.size() == 2000);
  double mean_z = 0.0;
  for (const RayScanRecord& r : records) {
    CHECK(r.distance >= 0.0);
    CHECK(r.distance <= 10.0);
    CHECK(r.loss == doctest::Approx(r.distance).epsilon(1e-12));
    mean_z += r.distance;
  }
  mean_z /= static_cast<double>(records.size());
  // U[0,10]: mean 5, sd 10/sqrt(12); five standard errors.
  CHECK(std::abs(mean_z - 5.0) <= 5.0 * 10.0 / std::sqrt(12.0 * 2000.0));

  Rng rng2(11u);
  auto again = batchlab::random_ray_scan(w0, dist_loss, 10.0, 50, rng2);
  for (std::size_t i = 0; i < again.size(); ++i)
    CHECK(again[i].distance == records[i].distance);

  Rng rng3(12u);
  auto zero = batchlab::random_ray_scan(w0, dist_loss, 0.0, 100, rng3);
  for (const RayScanRecord& r : zero) {
    CHECK(r.distance == 0.0);
    CHECK(r.loss == 0.0);
  }

  Rng rng4(13u);
  CHECK_THROWS_AS(batchlab::random_ray_scan(w0, dist_loss, -1.0, 10, rng4),
                  batchlab::ParameterError);
  CHECK_THROWS_AS(batchlab::random_ray_scan(w0, dist_loss, 1.0, 0, rng4),
                  batchlab::ParameterError);
}

TEST_CASE("binned loss std matches the linear-noise generating model") {
  const double l0 = 7.25;
  Rng rng(21u);
  std::vector<RayScanRecord> records;
  for (std::size_t i = 0; i < 20000; ++i) {
    const double z = rng.uniform(0.0, 10.0);
    records.push_back({z, l0 + z * rng.normal()});
  }
  auto bins = batchlab::binned_loss_std(records, 10, l0);
  REQUIRE(bins.size() == 10);
  std::vector<double> centers, stds;
  for (const auto& b : bins) {
    centers.push_back(b.center);
    stds.push_back(b.value);
  }
  batchlab::LineFit fit = batchlab::fit_line(centers, stds);
  CHECK(std::abs(fit.slope - 1.0) < 0.1);
  CHECK(std::abs(fit.intercept) < 0.1);

  // Constant loss: every bin reads exactly zero.
  std::vector<RayScanRecord> flat;
  for (std::size_t i = 0; i < 100; ++i)
    flat.push_back({0.1 * static_cast<double>(i + 1), l0});
  for (const auto& b : batchlab::binned_loss_std(flat, 5, l0)) CHECK(b.value == 0.0);
}

TEST_CASE("binned loss std invariances and merging") {
  Rng rng(22u);
  std::vector<RayScanRecord> records;
  for (std::size_t i = 0; i < 500; ++i) {
    const double z = rng.uniform(0.0, 4.0);
    records.push_back({z, 1.0 + z * rng.normal()});
  }
  auto base = batchlab::binned_loss_std(records, 8, 1.0);

  std::vector<RayScanRecord> shuffled = records;
  Rng perm(23u);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[perm.next_below(i)]);
  auto reordered = batchlab::binned_loss_std(shuffled, 8, 1.0);
  REQUIRE(reordered.size() == base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(reordered[i].center == base[i].center);
    CHECK(reordered[i].value == base[i].value);
    CHECK(reordered[i].count == base[i].count);
  }

  std::vector<RayScanRecord> shifted = records;
  for (auto& r : shifted) r.loss += 11.5;
  auto moved = batchlab::binned_loss_std(shifted, 8, 1.0 + 11.5);
  for (std::size_t i = 0; i < base.size(); ++i)
    CHECK(moved[i].value == doctest::Approx(base[i].value).epsilon(1e-9));

  // Two occupied islands: the empty middle merges into the upper group.
  std::vector<RayScanRecord> islands;
  for (std::size_t i = 0; i < 50; ++i) {
    const double z = 0.02 * static_cast<double>(i);
    islands.push_back({z, 2.0});
    islands.push_back({9.0 + 0.02 * static_cast<double>(i), 3.0});
  }
  auto merged = batchlab::binned_loss_std(islands, 10, 2.0);
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].count == 50);
  CHECK(merged[1].count == 50);
  CHECK(merged[0].value == 0.0);
  CHECK(merged[1].value == 1.0);

  CHECK_THROWS_AS(batchlab::binned_loss_std(records, 1, 0.0), batchlab::ParameterError);
  CHECK_THROWS_AS(batchlab::binned_loss_std({}, 4, 0.0), batchlab::SizeError);
  std::vector<RayScanRecord> same = {{1.0, 2.0}, {1.0, 3.0}};
  CHECK_THROWS_AS(batchlab::binned_loss_std(same, 4, 0.0), batchlab::ConsistencyError);
}

TEST_CASE("max-margin oracle: two-point geometry and support property") {
  SeparableDataset d = two_point_dataset();
  batchlab::MaxMargin mm = batchlab::max_margin_oracle(d);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(mm.w_hat[0] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(mm.w_hat[1] == doctest::Approx(inv_sqrt2).epsilon(1e-12));
  CHECK(mm.margin == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

  SeparableDataset d3;
  d3.inputs = Tensor({3, 2}, {1.0, 1.0, -1.0, -1.0, 3.0, 3.0});
  d3.labels = {1, -1, 1};
  batchlab::MaxMargin mm3 = batchlab::max_margin_oracle(d3);
  CHECK(mm3.w_hat[0] == doctest::Approx(mm.w_hat[0]).epsilon(1e-12));
  CHECK(mm3.w_hat[1] == doctest::Approx(mm.w_hat[1]).epsilon(1e-12));
  CHECK(mm3.margin == doctest::Approx(mm.margin).epsilon(1e-12));
}

TEST_CASE("max-margin oracle agrees with a fine direction grid") {
  SeparableDataset d = seeded_dataset(31u, 20, 2);
  batchlab::MaxMargin mm = batchlab::max_margin_oracle(d);
  CHECK(mm.margin > 0.0);

  double grid_best = -1e300;
  Tensor u = Tensor::zeros({2});
  for (double th = 0.0; th < 2.0 * M_PI; th += 5e-4) {
    u[0] = std::cos(th);
    u[1] = std::sin(th);
    grid_best = std::max(grid_best, batchlab::margin_of(d, u));
  }
  CHECK(mm.margin >= grid_best - 1e-12);
  CHECK(mm.margin - grid_best < 1e-3);
}

TEST_CASE("max-margin oracle beats random directions and rejects bad input") {
  SeparableDataset d = seeded_dataset(33u, 15, 3);
  batchlab::MaxMargin mm = batchlab::max_margin_oracle(d);
  CHECK(mm.margin > 0.0);
  Rng rng(34u);
  for (int i = 0; i < 10000; ++i) {
    Tensor u = Tensor::zeros({3});
    double n2 = 0.0;
    for (int j = 0; j < 3; ++j) {
      u[j] = rng.normal();
      n2 += u[j] * u[j];
    }
    const double n = std::sqrt(n2);
    double dot = 0.0;
    for (int j = 0; j < 3; ++j) {
      u[j] /= n;
      dot += u[j] * mm.w_hat[j];
    }
    if (dot > 1.0 - 1e-9) continue;  // effectively w_hat itself
    CHECK(mm.margin > batchlab::margin_of(d, u));
  }

  SeparableDataset inseparable;
  inseparable.inputs = Tensor({2, 2}, {1.0, 0.0, 2.0, 0.0});
  inseparable.labels = {1, -1};
  CHECK_THROWS_AS(batchlab::max_margin_oracle(inseparable), batchlab::InfeasibleError);

  SeparableDataset wide;
  wide.inputs = Tensor::zeros({2, 4});
  wide.labels = {1, -1};
  CHECK_THROWS_AS(batchlab::max_margin_oracle(wide), batchlab::DimensionError);

  SeparableDataset many;
  many.inputs = Tensor::zeros({51, 2});
  many.labels.assign(51, 1);
  CHECK_THROWS_AS(batchlab::max_margin_oracle(many), batchlab::SizeError);

  SeparableDataset badlab = two_point_dataset();
  badlab.labels[1] = 0;
  CHECK_THROWS_AS(batchlab::max_margin_oracle(badlab), batchlab::ParameterError);
}

TEST_CASE("logistic descent aligns with the max-margin direction") {
  SeparableDataset sym = two_point_dataset();
  batchlab::MarginTrace tr = batchlab::run_margin_experiment(sym, 0.5, 2000, 20);
  REQUIRE(!tr.entries.empty());
  for (const auto& e : tr.entries) {
    CHECK(e.cosine == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e.margin == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(e.margin <= tr.oracle_margin + 1e-12);
  }

  SeparableDataset d = seeded_dataset(31u, 20, 2);
  batchlab::MarginTrace trace = batchlab::run_margin_experiment(d, 0.5, 1000000, 40);
  CHECK(trace.entries.back().cosine >= 0.99);
  std::vector<double> ratio;
  for (const auto& e : trace.entries) {
    CHECK(e.cosine >= -1.0);
    CHECK(e.cosine <= 1.0);
    CHECK(e.margin <= trace.oracle_margin + 1e-12);
    if (e.t >= 100000) {
      CHECK(e.cosine >= 0.99);
      ratio.push_back(e.norm / std::log(static_cast<double>(e.t)));
    }
  }
  REQUIRE(ratio.size() >= 3);
  const double hi = *std::max_element(ratio.begin(), ratio.end());
  const double lo = *std::min_element(ratio.begin(), ratio.end());
  double mean = 0.0;
  for (double r : ratio) mean += r;
  mean /= static_cast<double>(ratio.size());
  CHECK((hi - lo) / mean < 0.20);

  CHECK_THROWS_AS(batchlab::run_margin_experiment(d, 1e308, 100, 5),
                  batchlab::NumericError);
}

TEST_CASE("diffusion csv files: round trips and schemas") {
  DistanceSeries s;
  s.entries.push_back({1, 0.5, 2.25, 0.11, true});
  s.entries.push_back({4, 1.5, 1.75, 0.0, false});
  s.entries.push_back({9, 2.25, 1.5, 0.09, true});
  const char* path = "distance_roundtrip.csv";
  batchlab::save_distance_csv(s, path);
  DistanceSeries back = batchlab::load_distance_csv(path);
  REQUIRE(back.entries.size() == s.entries.size());
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    CHECK(back.entries[i].t == s.entries[i].t);
    CHECK(back.entries[i].distance == s.entries[i].distance);
    CHECK(back.entries[i].train_loss == s.entries[i].train_loss);
    CHECK(back.entries[i].has_val == s.entries[i].has_val);
    if (s.entries[i].has_val) CHECK(back.entries[i].val_error == s.entries[i].val_error);
  }
  const char* path2 = "distance_roundtrip2.csv";
  batchlab::save_distance_csv(back, path2);
  FILE* f1 = std::fopen(path, "rb");
  FILE* f2 = std::fopen(path2, "rb");
  REQUIRE(f1);
  REQUIRE(f2);
  char b1[2048], b2[2048];
  const std::size_t n1 = std::fread(b1, 1, sizeof(b1), f1);
  const std::size_t n2 = std::fread(b2, 1, sizeof(b2), f2);
  std::fclose(f1);
  std::fclose(f2);
  CHECK(n1 == n2);
  CHECK(std::memcmp(b1, b2, n1) == 0);
  std::remove(path);
  std::remove(path2);

  std::vector<RayScanRecord> recs = {{0.5, 1.25}, {1.5, 0.75}};
  batchlab::save_ray_csv(recs, "ray_schema.csv");
  FILE* fr = std::fopen("ray_schema.csv", "rb");
  REQUIRE(fr);
  char line[128];
  REQUIRE(std::fgets(line, sizeof(line), fr));
  CHECK(std::strcmp(line, "distance,loss\n") == 0);
  std::fclose(fr);
  std::remove("ray_schema.csv");

  batchlab::MarginTrace tr;
  tr.w_hat = Tensor({2}, {1.0, 0.0});
  tr.entries.push_back({1, 0.5, 0.9, 0.25});
  batchlab::save_margin_csv(tr, "margin_schema.csv");
  FILE* fm = std::fopen("margin_schema.csv", "rb");
  REQUIRE(fm);
  REQUIRE(std::fgets(line, sizeof(line), fm));
  CHECK(std::strcmp(line, "t,norm,cosine,margin\n") == 0);
  std::fclose(fm);
  std::remove("margin_schema.csv");

  CHECK_THROWS_AS(batchlab::load_distance_csv("no_such_file.csv"), batchlab::IoError);
}
