#include "doctest.h"

#include <cmath>
#include <cstring>
#include <vector>

#include "batchlab/batchnorm.hpp"
#include "batchlab/error.hpp"
#include "batchlab/rng.hpp"

using batchlab::BnCache;
using batchlab::BnState;
using batchlab::Rng;
using batchlab::Tensor;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.same_shape(b) && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("ghost normalization of [1,2,3,4] with virtual batches of 2") {
  // Slice means 1.5 / 3.5, biased std 0.5 each: output alternates -1, +1.
  BnState st = BnState::make(1, 2, 0.1, 0.0);
  const double gamma = 1.0, beta = 0.0;
  Tensor x({4, 1}, {1, 2, 3, 4});
  Tensor y = batchlab::gbn_train_forward(st, &gamma, &beta, x, nullptr);
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(y[2] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(y[3] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("constant input within each slice collapses to beta") {
  BnState st = BnState::make(2, 3, 0.1, 1e-5);
  const double gamma[2] = {2.0, -1.0}, beta[2] = {0.25, -0.75};
  Tensor x = Tensor::zeros({6, 2});
  for (std::size_t i = 0; i < 6; ++i) {
    x.at(i, 0) = i < 3 ? 5.0 : -2.0;
    x.at(i, 1) = i < 3 ? 1.0 : 4.0;
  }
  Tensor y = batchlab::gbn_train_forward(st, gamma, beta, x, nullptr);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(y.at(i, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(y.at(i, 1) == doctest::Approx(-0.75).epsilon(1e-12));
  }
}

TEST_CASE("one ghost slice equals the standard batch-norm path bitwise") {
  Rng rng(50u);
  const std::size_t m = 32, d = 7;
  auto x = batchlab::gaussian(rng, {m, d}, 0.3, 2.0);
  std::vector<double> gamma(d), beta(d);
  for (std::size_t j = 0; j < d; ++j) {
    gamma[j] = rng.uniform(0.5, 1.5);
    beta[j] = rng.uniform(-1.0, 1.0);
  }

  BnState bn = BnState::make(d, 1, 0.1, 1e-5);
  bn.ghost = 0;  // standard path
  BnState gbn = BnState::make(d, m, 0.1, 1e-5);  // one slice covering the batch

  BnCache cb, cg;
  Tensor yb = batchlab::bn_train_forward(bn, gamma.data(), beta.data(), x, &cb);
  Tensor yg = batchlab::gbn_train_forward(gbn, gamma.data(), beta.data(), x, &cg);
  CHECK(bitwise_equal(yb, yg));
  CHECK(bitwise_equal(bn.mu_run, gbn.mu_run));
  CHECK(bitwise_equal(bn.sigma_run, gbn.sigma_run));

  // And the backward pass agrees bitwise as well.
  auto dy = batchlab::gaussian(rng, {m, d}, 0.0, 1.0);
  std::vector<double> dgb(d, 0.0), dbb(d, 0.0), dgg(d, 0.0), dbg(d, 0.0);
  Tensor dxb = batchlab::bn_backward(bn, cb, gamma.data(), dy, dgb.data(), dbb.data());
  Tensor dxg = batchlab::bn_backward(gbn, cg, gamma.data(), dy, dgg.data(), dbg.data());
  CHECK(bitwise_equal(dxb, dxg));
  for (std::size_t j = 0; j < d; ++j) {
    CHECK(dgb[j] == dgg[j]);
    CHECK(dbb[j] == dbg[j]);
  }
}

TEST_CASE("train output per slice has mean beta and biased std gamma") {
  Rng rng(51u);
  const std::size_t m = 24, d = 5, ghost = 6;
  auto x = batchlab::gaussian(rng, {m, d}, -1.0, 3.0);
  std::vector<double> gamma(d), beta(d);
  for (std::size_t j = 0; j < d; ++j) {
    gamma[j] = 1.7;
    beta[j] = -0.3;
  }
  BnState st = BnState::make(d, ghost, 0.1, 0.0);  // epsilon 0 for the exact std check
  Tensor y = batchlab::gbn_train_forward(st, gamma.data(), beta.data(), x, nullptr);

  for (std::size_t s = 0; s < m / ghost; ++s) {
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = s * ghost; i < (s + 1) * ghost; ++i) mean += y.at(i, j);
      mean /= ghost;
      CHECK(std::abs(mean - (-0.3)) < 1e-10);
      double var = 0.0;
      for (std::size_t i = s * ghost; i < (s + 1) * ghost; ++i)
        var += (y.at(i, j) - mean) * (y.at(i, j) - mean);
      var /= ghost;
      CHECK(std::abs(std::sqrt(var) - 1.7) < 1e-8);
    }
  }
}

TEST_CASE("a trailing short slice is normalized with its own statistics") {
  BnState st = BnState::make(1, 4, 0.1, 0.0);
  const double gamma = 1.0, beta = 0.0;
  // Rows 0..3 are one slice; rows 4..5 (the remainder) another.
  Tensor x({6, 1}, {1, 2, 3, 4, 10, 20});
  Tensor y = batchlab::gbn_train_forward(st, &gamma, &beta, x, nullptr);
  // Remainder slice: mean 15, biased std 5 -> -1, +1.
  CHECK(y[4] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(y[5] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eval before any training pass is a state error") {
  BnState st = BnState::make(3, 4, 0.1, 1e-5);
  const double gamma[3] = {1, 1, 1}, beta[3] = {0, 0, 0};
  Tensor x = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(batchlab::bn_eval_forward(st, gamma, beta, x), batchlab::StateError);
}

TEST_CASE("eval at the running mean returns beta; rows decouple") {
  Rng rng(52u);
  const std::size_t d = 4;
  BnState st = BnState::make(d, 8, 0.1, 1e-5);
  std::vector<double> gamma(d, 1.0), beta(d);
  for (std::size_t j = 0; j < d; ++j) beta[j] = 0.1 * static_cast<double>(j);
  auto x = batchlab::gaussian(rng, {16, d}, 2.0, 1.0);
  batchlab::gbn_train_forward(st, gamma.data(), beta.data(), x, nullptr);

  Tensor probe = Tensor::zeros({1, d});
  for (std::size_t j = 0; j < d; ++j) probe.at(0, j) = st.mu_run[j];
  Tensor y = batchlab::bn_eval_forward(st, gamma.data(), beta.data(), probe);
  for (std::size_t j = 0; j < d; ++j) CHECK(y.at(0, j) == doctest::Approx(beta[j]).epsilon(1e-14));

  // Batch-size independence: evaluating rows singly matches the batch result.
  auto q = batchlab::gaussian(rng, {5, d}, 0.0, 2.0);
  Tensor yq = batchlab::bn_eval_forward(st, gamma.data(), beta.data(), q);
  for (std::size_t i = 0; i < 5; ++i) {
    Tensor one = Tensor::zeros({1, d});
    std::memcpy(one.data(), q.row(i), d * sizeof(double));
    Tensor y1 = batchlab::bn_eval_forward(st, gamma.data(), beta.data(), one);
    for (std::size_t j = 0; j < d; ++j) CHECK(y1.at(0, j) == yq.at(i, j));
  }
}

TEST_CASE("training on a constant stream drives the running mean to it") {
  const std::size_t d = 2;
  BnState st = BnState::make(d, 4, 0.1, 1e-5);
  std::vector<double> gamma(d, 1.0), beta(d, 0.7);
  Tensor x = Tensor::zeros({8, d});
  for (std::size_t i = 0; i < 8; ++i) {
    x.at(i, 0) = 3.25;
    x.at(i, 1) = -1.5;
  }
  for (int step = 0; step < 200; ++step)
    batchlab::gbn_train_forward(st, gamma.data(), beta.data(), x, nullptr);
  CHECK(std::abs(st.mu_run[0] - 3.25) < 1e-8);
  CHECK(std::abs(st.mu_run[1] + 1.5) < 1e-8);
  Tensor y = batchlab::bn_eval_forward(st, gamma.data(), beta.data(), x);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(std::abs(y.at(i, 0) - 0.7) < 1e-6);
    CHECK(std::abs(y.at(i, 1) - 0.7) < 1e-6);
  }
}

TEST_CASE("variance-space running stats reproduce std-space eval on constants") {
  const std::size_t d = 1;
  BnState sstd = BnState::make(d, 4, 0.1, 1e-5, false);
  BnState svar = BnState::make(d, 4, 0.1, 1e-5, true);
  const double gamma = 1.0, beta = 0.0;
  Tensor x({4, 1}, {1.0, 2.0, 3.0, 4.0});
  for (int i = 0; i < 300; ++i) {
    batchlab::gbn_train_forward(sstd, &gamma, &beta, x, nullptr);
    batchlab::gbn_train_forward(svar, &gamma, &beta, x, nullptr);
  }
  // Fixed point of both EMAs is the same per-slice statistic, so eval agrees.
  Tensor probe({1, 1}, {2.0});
  Tensor y1 = batchlab::bn_eval_forward(sstd, &gamma, &beta, probe);
  Tensor y2 = batchlab::bn_eval_forward(svar, &gamma, &beta, probe);
  CHECK(y1[0] == doctest::Approx(y2[0]).epsilon(1e-10));
}

TEST_CASE("sequential EMA over slices matches its closed-form expansion") {
  // After one pass over n slices starting from (mu0, s0):
  // mu_run = (1-eta)^n mu0 + eta * sum_l (1-eta)^(n-l) mu_l, slices in order.
  Rng rng(53u);
  const std::size_t d = 3, ghost = 4, m = 12;
  const double eta = 0.25;
  auto x = batchlab::gaussian(rng, {m, d}, 0.5, 1.3);
  std::vector<double> gamma(d, 1.0), beta(d, 0.0);
  BnState st = BnState::make(d, ghost, eta, 1e-5);
  batchlab::gbn_train_forward(st, gamma.data(), beta.data(), x, nullptr);

  const std::size_t n = m / ghost;
  for (std::size_t j = 0; j < d; ++j) {
    double expect = std::pow(1.0 - eta, static_cast<double>(n)) * 0.0;
    for (std::size_t l = 1; l <= n; ++l) {
      double mu = 0.0;
      for (std::size_t i = (l - 1) * ghost; i < l * ghost; ++i) mu += x.at(i, j);
      mu /= ghost;
      expect += eta * std::pow(1.0 - eta, static_cast<double>(n - l)) * mu;
    }
    CHECK(st.mu_run[j] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("bn parameter validation") {
  CHECK_THROWS_AS(BnState::make(0, 4, 0.1, 1e-5), batchlab::ParameterError);
  CHECK_THROWS_AS(BnState::make(3, 4, 0.0, 1e-5), batchlab::ParameterError);
  CHECK_THROWS_AS(BnState::make(3, 4, 1.0, 1e-5), batchlab::ParameterError);
  CHECK_THROWS_AS(BnState::make(3, 4, 0.1, -1.0), batchlab::ParameterError);

  BnState st = BnState::make(3, 4, 0.1, 1e-5);
  const double gamma[3] = {1, 1, 1}, beta[3] = {0, 0, 0};
  Tensor wrong = Tensor::zeros({2, 2});
  CHECK_THROWS_AS(batchlab::gbn_train_forward(st, gamma, beta, wrong, nullptr),
                  batchlab::DimensionError);
}
