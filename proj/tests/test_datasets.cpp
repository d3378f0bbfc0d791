#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "batchlab/dataset.hpp"
#include "batchlab/error.hpp"
#include "batchlab/idx.hpp"
#include "batchlab/rng.hpp"

using batchlab::BatchSampler;
using batchlab::Dataset;
using batchlab::Rng;
using batchlab::SampleMode;
using batchlab::Tensor;

namespace {

std::string tmp_path(const char* name) {
  return std::string("/tmp/batchlab_test_") + name;
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, unsigned long x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

}  // namespace

TEST_CASE("hand-written two-image idx fixture loads with exact pixel values") {
  // Two 2x2 images: [0, 51, 102, 255] and [255, 204, 153, 0]; labels 3, 7.
  std::vector<unsigned char> img;
  push_be32(img, 0x00000803u);
  push_be32(img, 2);
  push_be32(img, 2);
  push_be32(img, 2);
  for (unsigned char b : {0, 51, 102, 255, 255, 204, 153, 0}) img.push_back(b);
  std::vector<unsigned char> lab;
  push_be32(lab, 0x00000801u);
  push_be32(lab, 2);
  lab.push_back(3);
  lab.push_back(7);
  const auto ip = tmp_path("fixture_images.idx"), lp = tmp_path("fixture_labels.idx");
  write_bytes(ip, img);
  write_bytes(lab.size() ? lp : lp, lab);

  Dataset ds = batchlab::load_mnist_idx(ip, lp);
  CHECK(ds.size() == 2);
  CHECK(ds.dim() == 4);
  CHECK(ds.labels[0] == 3);
  CHECK(ds.labels[1] == 7);
  CHECK(ds.inputs.at(0, 0) == 0.0);
  CHECK(ds.inputs.at(0, 1) == 51.0 / 255.0);
  CHECK(ds.inputs.at(0, 2) == 102.0 / 255.0);
  CHECK(ds.inputs.at(0, 3) == 1.0);
  CHECK(ds.inputs.at(1, 0) == 1.0);
  CHECK(ds.inputs.at(1, 3) == 0.0);
}

TEST_CASE("idx loader rejects wrong magic, truncation and count mismatch") {
  const auto ip = tmp_path("bad_images.idx"), lp = tmp_path("bad_labels.idx");

  // Labels file carrying the image magic: format error.
  std::vector<unsigned char> img;
  push_be32(img, 0x00000803u);
  push_be32(img, 1);
  push_be32(img, 1);
  push_be32(img, 1);
  img.push_back(9);
  std::vector<unsigned char> lab;
  push_be32(lab, 0x00000803u);  // wrong: should be 0x00000801
  push_be32(lab, 1);
  lab.push_back(0);
  write_bytes(ip, img);
  write_bytes(lp, lab);
  CHECK_THROWS_AS(batchlab::load_mnist_idx(ip, lp), batchlab::FormatError);

  // Truncated image payload: I/O error.
  std::vector<unsigned char> short_img;
  push_be32(short_img, 0x00000803u);
  push_be32(short_img, 2);
  push_be32(short_img, 2);
  push_be32(short_img, 2);
  short_img.push_back(1);  // 1 byte instead of 8
  std::vector<unsigned char> lab2;
  push_be32(lab2, 0x00000801u);
  push_be32(lab2, 2);
  lab2.push_back(0);
  lab2.push_back(1);
  write_bytes(ip, short_img);
  write_bytes(lp, lab2);
  CHECK_THROWS_AS(batchlab::load_mnist_idx(ip, lp), batchlab::IoError);

  // Counts disagree: consistency error.
  std::vector<unsigned char> img3;
  push_be32(img3, 0x00000803u);
  push_be32(img3, 1);
  push_be32(img3, 1);
  push_be32(img3, 1);
  img3.push_back(4);
  write_bytes(ip, img3);
  write_bytes(lp, lab2);  // says 2 labels
  CHECK_THROWS_AS(batchlab::load_mnist_idx(ip, lp), batchlab::ConsistencyError);

  CHECK_THROWS_AS(batchlab::load_mnist_idx(tmp_path("missing"), lp), batchlab::IoError);
}

TEST_CASE("idx save/load round trip is bit exact") {
  Dataset ds = batchlab::make_synthetic_images(1234u, 20, 12, 4);
  const auto ip = tmp_path("rt_images.idx"), lp = tmp_path("rt_labels.idx");
  batchlab::save_mnist_idx(ds, ip, lp, 12, 12);
  Dataset back = batchlab::load_mnist_idx(ip, lp);
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.labels[i] == ds.labels[i]);
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) CHECK(back.inputs[i] == ds.inputs[i]);

  // Values that are not exact 8-bit gray levels must be refused.
  Dataset ugly = ds;
  ugly.inputs[0] = 0.5;  // 127.5/255: not representable
  CHECK_THROWS_AS(batchlab::save_mnist_idx(ugly, ip, lp, 12, 12), batchlab::NumericError);
}

TEST_CASE("full-batch without replacement is a permutation") {
  BatchSampler s(SampleMode::without_replacement, 8, 8, Rng(1u));
  auto b = s.next_batch();
  REQUIRE(b.size() == 8);
  std::set<std::size_t> seen(b.begin(), b.end());
  CHECK(seen.size() == 8);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 7);
}

TEST_CASE("consecutive without-replacement batches partition the population") {
  BatchSampler s(SampleMode::without_replacement, 4, 2, Rng(7u));
  auto b1 = s.next_batch();
  auto b2 = s.next_batch();
  REQUIRE(b1.size() == 2);
  REQUIRE(b2.size() == 2);
  std::set<std::size_t> all(b1.begin(), b1.end());
  all.insert(b2.begin(), b2.end());
  CHECK(all.size() == 4);
}

TEST_CASE("epoch coverage holds over many epochs, including a short tail batch") {
  const std::size_t n = 103, m = 10;  // 10 full batches + tail of 3
  BatchSampler s(SampleMode::without_replacement, n, m, Rng(3u));
  for (int epoch = 0; epoch < 5; ++epoch) {
    std::vector<int> count(n, 0);
    std::size_t got = 0;
    while (got < n) {
      auto b = s.next_batch();
      got += b.size();
      for (auto i : b) ++count[i];
    }
    CHECK(got == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(count[i] == 1);
  }
}

TEST_CASE("with-replacement frequencies match the occupancy rate") {
  // N=2, M=1: each index should appear with frequency 1/2 +- 0.01 over 1e5 draws.
  BatchSampler s(SampleMode::with_replacement, 2, 1, Rng(11u));
  int zero = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (s.next_batch()[0] == 0) ++zero;
  const double freq = static_cast<double>(zero) / draws;
  CHECK(std::abs(freq - 0.5) < 0.01);

  // Expected multiplicity per batch is M/N for every index.
  const std::size_t n = 10, m = 4;
  BatchSampler s2(SampleMode::with_replacement, n, m, Rng(12u));
  std::vector<long> occur(n, 0);
  const int batches = 50000;
  for (int i = 0; i < batches; ++i)
    for (auto idx : s2.next_batch()) ++occur[idx];
  for (std::size_t i = 0; i < n; ++i) {
    const double rate = static_cast<double>(occur[i]) / (static_cast<double>(batches) * m);
    CHECK(std::abs(rate - 1.0 / static_cast<double>(n)) < 0.005);
  }
}

TEST_CASE("mini-batch averages over all ordered draws reproduce the full mean exactly") {
  // Enumerate every ordered with-replacement batch (N^M of them) and average
  // per-batch means: the grand mean must equal the population mean exactly.
  const std::size_t n = 8, m = 3;
  Rng rng(21u);
  std::vector<double> g(n);
  for (auto& v : g) v = rng.uniform(-1.0, 1.0);
  double full = 0.0;
  for (double v : g) full += v;
  full /= static_cast<double>(n);

  double grand = 0.0;
  std::size_t batches = 0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < n; ++c) {
        grand += (g[a] + g[b] + g[c]) / static_cast<double>(m);
        ++batches;
      }
  grand /= static_cast<double>(batches);
  CHECK(grand == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("sampler parameter validation") {
  CHECK_THROWS_AS(BatchSampler(SampleMode::with_replacement, 0, 1, Rng(1u)),
                  batchlab::ParameterError);
  CHECK_THROWS_AS(BatchSampler(SampleMode::with_replacement, 4, 0, Rng(1u)),
                  batchlab::ParameterError);
  CHECK_THROWS_AS(BatchSampler(SampleMode::with_replacement, 4, 5, Rng(1u)),
                  batchlab::ParameterError);
}

TEST_CASE("make_separable: symmetric pair has margin sqrt(2) along the diagonal") {
  Tensor x({2, 2}, {1, 1, -1, -1});
  std::vector<int> y = {1, -1};
  Tensor diag({2}, {1.0, 1.0});
  CHECK(batchlab::min_margin(x, y, diag) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("make_separable output verifies against its own witness") {
  Rng rng(5u);
  auto ds = batchlab::make_separable(rng, 40, 5, 0.7);
  CHECK(ds.margin == 0.7);
  CHECK(std::abs(batchlab::l2_norm(ds.witness) - 1.0) < 1e-12);
  CHECK(batchlab::min_margin(ds.inputs, ds.labels, ds.witness) >= 0.7 * (1.0 - 1e-12));
  // Both labels occur.
  CHECK(std::count(ds.labels.begin(), ds.labels.end(), 1) > 0);
  CHECK(std::count(ds.labels.begin(), ds.labels.end(), -1) > 0);
}

TEST_CASE("make_separable rejects degenerate parameters") {
  Rng rng(6u);
  CHECK_THROWS_AS(batchlab::make_separable(rng, 40, 5, 0.0), batchlab::ParameterError);
  CHECK_THROWS_AS(batchlab::make_separable(rng, 1, 5, 0.5), batchlab::ParameterError);
  CHECK_THROWS_AS(batchlab::make_separable(rng, 4, 1, 0.5), batchlab::ParameterError);
}

TEST_CASE("gaussian blobs: spread 0 pins points to their class centers") {
  Rng rng(8u);
  auto ds = batchlab::make_gaussian_blobs(rng, 6, 3, 3, 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int c = ds.labels[i];
    for (std::size_t j = 0; j < 3; ++j) {
      const double want =
          (j == static_cast<std::size_t>(c / 2)) ? ((c % 2 == 0) ? 1.0 : -1.0) : 0.0;
      CHECK(ds.inputs.at(i, j) == want);
    }
  }
}

TEST_CASE("gaussian blobs: two tight classes are separated by the first axis") {
  Rng rng(9u);
  auto ds = batchlab::make_gaussian_blobs(rng, 1000, 4, 2, 0.1);
  // Classifier oracle: sign of x1 (centers at +-e1, spread 0.1 => ~5 sigma).
  int correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int pred = ds.inputs.at(i, 0) >= 0.0 ? 0 : 1;
    if (pred == ds.labels[i]) ++correct;
  }
  CHECK(correct >= 990);
}

TEST_CASE("gaussian blobs: balanced N gives one point per class") {
  Rng rng(10u);
  auto ds = batchlab::make_gaussian_blobs(rng, 10, 5, 10, 0.01);
  std::vector<int> per_class(10, 0);
  for (int y : ds.labels) ++per_class[y];
  for (int c : per_class) CHECK(c == 1);
}

TEST_CASE("dataset csv round trip preserves values and labels") {
  Rng rng(13u);
  auto ds = batchlab::make_gaussian_blobs(rng, 30, 3, 3, 0.37);
  const auto path = tmp_path("blobs.csv");
  batchlab::save_dataset_csv(ds, path);
  Dataset back = batchlab::load_dataset_csv(path);
  REQUIRE(back.size() == ds.size());
  REQUIRE(back.dim() == ds.dim());
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) CHECK(back.inputs[i] == ds.inputs[i]);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.labels[i] == ds.labels[i]);

  // Header must end with `label`.
  std::ofstream bad(tmp_path("bad.csv"), std::ios::binary);
  bad << "x0,x1,y\n1,2,0\n";
  bad.close();
  CHECK_THROWS_AS(batchlab::load_dataset_csv(tmp_path("bad.csv")), batchlab::FormatError);
}

TEST_CASE("synthetic images are 8-bit clean, deterministic and class-structured") {
  auto a = batchlab::make_synthetic_images(42u, 64, 16, 10);
  auto b = batchlab::make_synthetic_images(42u, 64, 16, 10);
  REQUIRE(a.size() == 64);
  REQUIRE(a.dim() == 256);
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    CHECK(a.inputs[i] == b.inputs[i]);
    const double steps = a.inputs[i] * 255.0;
    CHECK(std::abs(steps - std::round(steps)) < 1e-9);
    CHECK(a.inputs[i] >= 0.0);
    CHECK(a.inputs[i] <= 1.0);
  }
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.labels[i] == b.labels[i]);

  // Same-class samples must be far more alike than cross-class ones.
  auto big = batchlab::make_synthetic_images(42u, 400, 16, 10);
  double same = 0.0, cross = 0.0;
  long n_same = 0, n_cross = 0;
  for (std::size_t i = 0; i < 100; ++i)
    for (std::size_t j = i + 1; j < 100; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < big.dim(); ++k) {
        const double diff = big.inputs.at(i, k) - big.inputs.at(j, k);
        d2 += diff * diff;
      }
      if (big.labels[i] == big.labels[j]) {
        same += d2;
        ++n_same;
      } else {
        cross += d2;
        ++n_cross;
      }
    }
  REQUIRE(n_same > 0);
  REQUIRE(n_cross > 0);
  CHECK(same / n_same < 0.5 * cross / n_cross);
}

TEST_CASE("subset_shuffled picks k rows deterministically") {
  auto ds = batchlab::make_synthetic_images(7u, 50, 12, 5);
  auto s1 = batchlab::subset_shuffled(ds, 20, 99u);
  auto s2 = batchlab::subset_shuffled(ds, 20, 99u);
  REQUIRE(s1.size() == 20);
  for (std::size_t i = 0; i < s1.inputs.size(); ++i) CHECK(s1.inputs[i] == s2.inputs[i]);
  auto s3 = batchlab::subset_shuffled(ds, 20, 100u);
  bool differs = false;
  for (std::size_t i = 0; i < s1.size() && !differs; ++i)
    if (s1.labels[i] != s3.labels[i]) differs = true;
  // Different seed almost surely picks a different arrangement.
  CHECK(differs);
  CHECK_THROWS_AS(batchlab::subset_shuffled(ds, 0, 1u), batchlab::ParameterError);
  CHECK_THROWS_AS(batchlab::subset_shuffled(ds, 51, 1u), batchlab::ParameterError);
}
