// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "prosody/kernels.hpp"
#include "prosody/rng.hpp"

namespace k = prosody::kernels;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  prosody::RngStream r(seed);
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * r.uniform() - 1.0;
  return v;
}

template <bool Omp>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  k::GemmShape s{n, 384, 256};
  const auto a = noise(n * 256, 1), b = noise(256 * 384, 2);
  std::vector<double> c(n * 384);
  for (auto _ : state) {
    if constexpr (Omp) k::omp::gemm(s, a.data(), b.data(), c.data());
    else k::serial::gemm(s, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n * 384 * 256));
}

template <bool Omp>
void BM_Cmnd(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto x = noise(frames * 160 + 2048, 3);
  std::vector<std::int64_t> starts(frames);
  for (std::size_t t = 0; t < frames; ++t) starts[t] = static_cast<std::int64_t>(t * 160);
  k::CmndShape shape{1024, 490};
  std::vector<double> out(frames * (shape.max_lag + 1));
  for (auto _ : state) {
    if constexpr (Omp) k::omp::cmnd_rows(x, starts, shape, out.data());
    else k::serial::cmnd_rows(x, starts, shape, out.data());
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Omp>
void BM_Fir(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = noise(n, 4), taps = noise(2001, 5);
  std::vector<double> y(n);
  for (auto _ : state) {
    if constexpr (Omp) k::omp::fir_zero_phase(x, taps, y);
    else k::serial::fir_zero_phase(x, taps, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Omp>
void BM_ViterbiStep(benchmark::State& state) {
  const std::size_t bins = 360;
  const auto prev = noise(bins, 6), trans = noise(bins * bins, 7), obs = noise(bins, 8);
  std::vector<double> next(bins);
  std::vector<std::int32_t> back(bins);
  for (auto _ : state) {
    if constexpr (Omp) k::omp::viterbi_step(prev, trans, obs, 12, next, back);
    else k::serial::viterbi_step(prev, trans, obs, 12, next, back);
    benchmark::DoNotOptimize(next.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Cmnd<false>)->Arg(100);
BENCHMARK(BM_Cmnd<true>)->Arg(100);
BENCHMARK(BM_Fir<false>)->Arg(16000);
BENCHMARK(BM_Fir<true>)->Arg(16000);
BENCHMARK(BM_ViterbiStep<false>);
BENCHMARK(BM_ViterbiStep<true>);

BENCHMARK_MAIN();
