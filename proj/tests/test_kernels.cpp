// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <vector>

#include "prosody/kernels.hpp"
#include "prosody/rng.hpp"

namespace k = prosody::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed, double zero_fraction = 0.0) {
  prosody::RngStream r(seed);
  std::vector<double> v(n);
  for (double& x : v) x = r.uniform() < zero_fraction ? 0.0 : 2.0 * r.uniform() - 1.0;
  return v;
}

// Plain triple loop, independent of the kernel's loop order.
std::vector<double> naive_gemm(const k::GemmShape& s, const std::vector<double>& a, const std::vector<double>& b,
                               std::vector<double> c) {
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < s.m; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = s.trans_a ? a[p * s.n + i] : a[i * s.k + p];
        const double bv = s.trans_b ? b[j * s.k + p] : b[p * s.m + j];
        acc += av * bv;
      }
      c[i * s.m + j] = (s.accumulate ? c[i * s.m + j] : 0.0) + acc;
    }
  return c;
}

}  // namespace

TEST_CASE("gemm: serial and omp agree bitwise and match a naive product") {
  omp_set_num_threads(4);
  for (int ta = 0; ta < 2; ++ta)
    for (int tb = 0; tb < 2; ++tb)
      for (int acc = 0; acc < 2; ++acc) {
        k::GemmShape s{67, 45, 130, ta == 1, tb == 1, acc == 1};
        const auto a = noise(s.n * s.k, 1, 0.2), b = noise(s.k * s.m, 2);
        const auto c0 = noise(s.n * s.m, 3);
        auto cs = c0, co = c0;
        k::serial::gemm(s, a.data(), b.data(), cs.data());
        k::omp::gemm(s, a.data(), b.data(), co.data());
        CHECK(cs == co);
        const auto ref = naive_gemm(s, a, b, c0);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(cs[i] == doctest::Approx(ref[i]).epsilon(1e-12));
      }
}

TEST_CASE("gemm: degenerate shapes") {
  k::GemmShape s{0, 5, 3};
  std::vector<double> a, b(15, 1.0), c;
  k::omp::gemm(s, a.data(), b.data(), c.data());
  k::GemmShape s2{2, 2, 0};
  std::vector<double> c2 = {1, 2, 3, 4};
  k::omp::gemm(s2, nullptr, nullptr, c2.data());
  CHECK(c2 == std::vector<double>(4, 0.0));
}

TEST_CASE("cmnd_rows: serial and omp agree; definition on a short signal") {
  omp_set_num_threads(4);
  const auto x = noise(4000, 5);
  std::vector<std::int64_t> starts = {-100, 0, 7, 1600, 3900};
  k::CmndShape shape{256, 120};
  std::vector<double> a(starts.size() * 121), b(a.size());
  k::serial::cmnd_rows(x, starts, shape, a.data());
  k::omp::cmnd_rows(x, starts, shape, b.data());
  CHECK(a == b);

  // Direct evaluation of the documented formula for start 7.
  std::vector<double> d(121, 0.0);
  auto at = [&](std::int64_t i) { return i < 0 || i >= 4000 ? 0.0 : x[static_cast<std::size_t>(i)]; };
  for (std::size_t tau = 1; tau <= 120; ++tau)
    for (std::size_t j = 0; j < 256; ++j) {
      const double e = at(7 + static_cast<std::int64_t>(j)) - at(7 + static_cast<std::int64_t>(j + tau));
      d[tau] += e * e;
    }
  double run = 0.0;
  CHECK(a[2 * 121] == 1.0);
  for (std::size_t tau = 1; tau <= 120; ++tau) {
    run += d[tau];
    CHECK(a[2 * 121 + tau] == doctest::Approx(d[tau] * tau / run).epsilon(1e-9));
  }
}

TEST_CASE("cmnd_rows: silence reads as 1") {
  std::vector<double> x(1000, 0.0);
  std::vector<std::int64_t> starts = {100};
  std::vector<double> out(51);
  k::serial::cmnd_rows(x, starts, {128, 50}, out.data());
  for (double v : out) CHECK(v == 1.0);
}

TEST_CASE("fir_zero_phase: serial and omp agree; impulse response is the mirrored taps") {
  omp_set_num_threads(3);
  const auto x = noise(5000, 7), taps = noise(101, 8);
  std::vector<double> a(x.size()), b(x.size());
  k::serial::fir_zero_phase(x, taps, a);
  k::omp::fir_zero_phase(x, taps, b);
  CHECK(a == b);

  std::vector<double> imp(301, 0.0), y(301);
  imp[150] = 1.0;
  k::omp::fir_zero_phase(imp, taps, y);
  for (std::size_t i = 0; i < 101; ++i) CHECK(y[200 - i] == doctest::Approx(taps[i]));
  CHECK(y[99] == 0.0);
  CHECK(y[201] == 0.0);
}

TEST_CASE("viterbi_step: serial and omp agree; matches a brute max with lower-index ties") {
  omp_set_num_threads(4);
  const std::size_t bins = 40, band = 3;
  auto prev = noise(bins, 9), trans = noise(bins * bins, 10), obs = noise(bins, 11);
  prev[5] = prev[6] = 10.0;  // tie candidates
  for (std::size_t j = 0; j < bins; ++j) {
    trans[5 * bins + j] = 0.0;
    trans[6 * bins + j] = 0.0;
  }
  std::vector<double> n1(bins), n2(bins);
  std::vector<std::int32_t> b1(bins), b2(bins);
  k::serial::viterbi_step(prev, trans, obs, band, n1, b1);
  k::omp::viterbi_step(prev, trans, obs, band, n2, b2);
  CHECK(n1 == n2);
  CHECK(b1 == b2);
  for (std::size_t j = 0; j < bins; ++j) {
    double best = -1e300;
    int arg = -1;
    for (std::size_t i = 0; i < bins; ++i) {
      if ((i > j ? i - j : j - i) > band) continue;
      const double v = prev[i] + trans[i * bins + j];
      if (v > best) {
        best = v;
        arg = static_cast<int>(i);
      }
    }
    CHECK(b1[j] == arg);
    CHECK(n1[j] == doctest::Approx(best + obs[j]));
  }
  CHECK(b1[6] == 5);
}
