#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "batchlab/error.hpp"
#include "batchlab/rng.hpp"

using batchlab::Rng;

TEST_CASE("philox block matches published reference vectors") {
  // Test vectors from the Random123 distribution (kat_vectors, philox4x32-10).
  auto zero = Rng::philox4x32({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(zero[0] == 0x6627e8d5u);
  CHECK(zero[1] == 0xe169c58du);
  CHECK(zero[2] == 0xbc57ac4cu);
  CHECK(zero[3] == 0x9b00dbd8u);

  const std::uint32_t ff = 0xffffffffu;
  auto ones = Rng::philox4x32({ff, ff, ff, ff}, {ff, ff});
  CHECK(ones[0] == 0x408f276du);
  CHECK(ones[1] == 0x41c83b0eu);
  CHECK(ones[2] == 0xa20bc7c6u);
  CHECK(ones[3] == 0x6d5451fdu);
}

TEST_CASE("same (seed, stream) replays the identical sequence") {
  Rng a(123456789u, 42u);
  Rng b(123456789u, 42u);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different streams under one seed do not collide") {
  Rng a(7u, 0u);
  Rng b(7u, 1u);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    if (a.next_u64() == b.next_u64()) ++agree;
  }
  CHECK(agree == 0);
}

TEST_CASE("split yields pairwise distinct child streams") {
  Rng root(99u);
  auto kids = root.split(16);
  REQUIRE(kids.size() == 16);
  std::set<std::uint64_t> streams;
  for (auto& k : kids) streams.insert(k.stream());
  CHECK(streams.size() == 16);

  // First outputs should all differ as well (no shared counter space).
  std::set<std::uint64_t> firsts;
  for (auto& k : kids) firsts.insert(k.next_u64());
  CHECK(firsts.size() == 16);
}

TEST_CASE("child derivation is a pure function of (parent, tag)") {
  Rng root(5u, 3u);
  Rng c1 = root.child(11);
  Rng c2 = root.child(11);
  CHECK(c1.stream() == c2.stream());
  CHECK(c1.next_u64() == c2.next_u64());
  Rng c3 = root.child(12);
  CHECK(c3.stream() != c1.stream());
}

TEST_CASE("next_double lands in [0,1) and uniform respects bounds") {
  Rng rng(2024u);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    double u = rng.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  // 1e5 draws should come within 1e-3 of both ends with overwhelming odds.
  CHECK(lo < 1e-3);
  CHECK(hi > 1.0 - 1e-3);

  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-2.5, 3.5);
    CHECK(u >= -2.5);
    CHECK(u < 3.5);
  }
  CHECK_THROWS_AS(rng.uniform(1.0, 0.0), batchlab::ParameterError);
}

TEST_CASE("next_below is in range and roughly uniform") {
  Rng rng(31337u);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    auto v = rng.next_below(7);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  // Expected 10000 per bucket, sd ~ sqrt(10000*(6/7)) ~ 93; allow 6 sd.
  for (int c : counts) {
    CHECK(c > 10000 - 560);
    CHECK(c < 10000 + 560);
  }
  CHECK_THROWS_AS(rng.next_below(0), batchlab::ParameterError);
}

TEST_CASE("gaussian sample statistics sit within standard-error bounds") {
  Rng rng(777u);
  const std::size_t n = 1000000;
  auto t = batchlab::gaussian(rng, {n}, 1.0, 0.5);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += t[i];
  mean /= static_cast<double>(n);
  // 5 standard errors: 5 * 0.5 / 1000 = 0.0025.
  CHECK(std::abs(mean - 1.0) < 0.0025);

  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (t[i] - mean) * (t[i] - mean);
  var /= static_cast<double>(n - 1);
  double sd = std::sqrt(var);
  // sd of the sample std is about std/sqrt(2n) ~ 0.00035; allow 5 of those.
  CHECK(std::abs(sd - 0.5) < 0.0018);
}

TEST_CASE("gaussian with std=0 is the constant mean") {
  Rng rng(1u);
  auto t = batchlab::gaussian(rng, {3, 4}, -2.25, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == -2.25);
  CHECK_THROWS_AS(batchlab::gaussian(rng, {2}, 0.0, -1.0), batchlab::ParameterError);
}

TEST_CASE("gaussian is deterministic in (seed, stream)") {
  Rng a(4242u, 9u);
  Rng b(4242u, 9u);
  auto ta = batchlab::gaussian(a, {257}, 0.0, 1.0);
  auto tb = batchlab::gaussian(b, {257}, 0.0, 1.0);
  for (std::size_t i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);
}

TEST_CASE("normal_at is independent of evaluation order") {
  const std::uint64_t seed = 88u, stream = 5u;
  std::vector<double> fwd, bwd;
  for (int i = 0; i < 64; ++i) fwd.push_back(batchlab::normal_at(seed, stream, static_cast<std::uint64_t>(i)));
  for (int i = 63; i >= 0; --i) bwd.push_back(batchlab::normal_at(seed, stream, static_cast<std::uint64_t>(i)));
  for (int i = 0; i < 64; ++i) CHECK(fwd[static_cast<std::size_t>(i)] == bwd[static_cast<std::size_t>(63 - i)]);
}

TEST_CASE("normal_at draws have standard-normal statistics") {
  double mean = 0.0, m2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = batchlab::normal_at(3u, 0u, static_cast<std::uint64_t>(i));
    mean += x;
    m2 += x * x;
  }
  mean /= n;
  double var = m2 / n - mean * mean;
  CHECK(std::abs(mean) < 5.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("uniform_tensor respects bounds and determinism") {
  Rng a(10u), b(10u);
  auto ta = batchlab::uniform_tensor(a, {100}, 2.0, 4.0);
  auto tb = batchlab::uniform_tensor(b, {100}, 2.0, 4.0);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    CHECK(ta[i] >= 2.0);
    CHECK(ta[i] < 4.0);
    CHECK(ta[i] == tb[i]);
  }
}
