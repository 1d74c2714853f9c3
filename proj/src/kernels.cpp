// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prosody::kernels {

namespace {

// Work below this many multiply-adds is not worth a parallel region.
constexpr std::size_t kParallelGemmWork = 1 << 15;

inline double a_at(const GemmShape& s, const double* a, std::size_t i, std::size_t p) {
  return s.trans_a ? a[p * s.n + i] : a[i * s.k + p];
}

// Row i of C. The summation order over p is fixed, shared by both variants.
inline void gemm_row(const GemmShape& s, const double* a, const double* b, double* c,
                     std::size_t i) {
  double* crow = c + i * s.m;
  if (!s.accumulate) std::fill(crow, crow + s.m, 0.0);
  if (!s.trans_b) {
    for (std::size_t p = 0; p < s.k; ++p) {
      const double av = a_at(s, a, i, p);
      if (av == 0.0) continue;
      const double* brow = b + p * s.m;
      for (std::size_t j = 0; j < s.m; ++j) crow[j] += av * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < s.m; ++j) {
      const double* brow = b + j * s.k;
      double acc = 0.0;
      for (std::size_t p = 0; p < s.k; ++p) acc += a_at(s, a, i, p) * brow[p];
      crow[j] += acc;
    }
  }
}

inline double sample_at(std::span<const double> x, std::int64_t i) {
  return (i >= 0 && i < static_cast<std::int64_t>(x.size())) ? x[static_cast<std::size_t>(i)]
                                                               : 0.0;
}

inline void cmnd_row(std::span<const double> x, std::int64_t start, const CmndShape& shape,
                     double* row) {
  const std::size_t span = shape.integration + shape.max_lag;
  // Local copy with zero fill keeps the inner loop branch free.
  std::vector<double> buf(span);
  for (std::size_t j = 0; j < span; ++j) buf[j] = sample_at(x, start + static_cast<std::int64_t>(j));
  row[0] = 1.0;
  double running = 0.0;
  for (std::size_t tau = 1; tau <= shape.max_lag; ++tau) {
    double d = 0.0;
    for (std::size_t j = 0; j < shape.integration; ++j) {
      const double diff = buf[j] - buf[j + tau];
      d += diff * diff;
    }
    running += d;
    row[tau] = running > 0.0 ? d * static_cast<double>(tau) / running : 1.0;
  }
}

inline double fir_at(std::span<const double> x, std::span<const double> taps, std::size_t n) {
  const std::int64_t half = static_cast<std::int64_t>(taps.size() / 2);
  const std::int64_t size = static_cast<std::int64_t>(x.size());
  const std::int64_t base = static_cast<std::int64_t>(n) - half;
  const std::int64_t k0 = std::max<std::int64_t>(0, -base);
  const std::int64_t k1 = std::min<std::int64_t>(static_cast<std::int64_t>(taps.size()), size - base);
  double acc = 0.0;
  for (std::int64_t k = k0; k < k1; ++k) acc += taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(base + k)];
  return acc;
}

inline void viterbi_cell(std::span<const double> prev, std::span<const double> log_trans,
                         std::span<const double> log_obs, std::size_t band, std::size_t j,
                         std::span<double> next, std::span<std::int32_t> back) {
  const std::size_t bins = prev.size();
  const std::size_t lo = j >= band ? j - band : 0;
  const std::size_t hi = std::min(bins - 1, j + band);
  double best = -std::numeric_limits<double>::infinity();
  std::int32_t arg = static_cast<std::int32_t>(lo);
  for (std::size_t i = lo; i <= hi; ++i) {
    const double cand = prev[i] + log_trans[i * bins + j];
    if (cand > best) {
      best = cand;
      arg = static_cast<std::int32_t>(i);
    }
  }
  next[j] = best + log_obs[j];
  back[j] = arg;
}

}  // namespace

namespace serial {

void gemm(const GemmShape& s, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < s.n; ++i) gemm_row(s, a, b, c, i);
}

void cmnd_rows(std::span<const double> x, std::span<const std::int64_t> starts,
               const CmndShape& shape, double* out) {
  for (std::size_t f = 0; f < starts.size(); ++f)
    cmnd_row(x, starts[f], shape, out + f * (shape.max_lag + 1));
}

void fir_zero_phase(std::span<const double> x, std::span<const double> taps,
                    std::span<double> y) {
  for (std::size_t n = 0; n < y.size(); ++n) y[n] = fir_at(x, taps, n);
}

void viterbi_step(std::span<const double> prev, std::span<const double> log_trans,
                  std::span<const double> log_obs, std::size_t band,
                  std::span<double> next, std::span<std::int32_t> back) {
  for (std::size_t j = 0; j < prev.size(); ++j)
    viterbi_cell(prev, log_trans, log_obs, band, j, next, back);
}

}  // namespace serial

namespace omp {

void gemm(const GemmShape& s, const double* a, const double* b, double* c) {
  const long rows = static_cast<long>(s.n);
  if (s.n * s.m * s.k < kParallelGemmWork || s.n < 2) {
    serial::gemm(s, a, b, c);
    return;
  }
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) gemm_row(s, a, b, c, static_cast<std::size_t>(i));
}

void cmnd_rows(std::span<const double> x, std::span<const std::int64_t> starts,
               const CmndShape& shape, double* out) {
  const long frames = static_cast<long>(starts.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long f = 0; f < frames; ++f)
    cmnd_row(x, starts[static_cast<std::size_t>(f)], shape,
             out + static_cast<std::size_t>(f) * (shape.max_lag + 1));
}

void fir_zero_phase(std::span<const double> x, std::span<const double> taps,
                    std::span<double> y) {
  const long count = static_cast<long>(y.size());
#pragma omp parallel for schedule(static)
  for (long n = 0; n < count; ++n) y[static_cast<std::size_t>(n)] = fir_at(x, taps, static_cast<std::size_t>(n));
}

void viterbi_step(std::span<const double> prev, std::span<const double> log_trans,
                  std::span<const double> log_obs, std::size_t band,
                  std::span<double> next, std::span<std::int32_t> back) {
  const long bins = static_cast<long>(prev.size());
#pragma omp parallel for schedule(static) if (bins >= 128)
  for (long j = 0; j < bins; ++j)
    viterbi_cell(prev, log_trans, log_obs, band, static_cast<std::size_t>(j), next, back);
}

}  // namespace omp

}  // namespace prosody::kernels
