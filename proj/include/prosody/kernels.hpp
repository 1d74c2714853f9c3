// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

// Data-parallel inner loops. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both compute each output element with the
// same operation order, so results are bitwise identical; tests rely on that.

namespace prosody::kernels {

/// Row-major matrix product description: C[n x m] (+)= op(A) * op(B), where
/// op(A) is n x k and op(B) is k x m.
struct GemmShape {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  bool trans_a = false;  // A stored k x n
  bool trans_b = false;  // B stored m x k
  bool accumulate = false;
};

/// Cumulative-mean-normalized difference rows. For every frame start s the
/// output row holds d'(tau) for tau = 0..max_lag with
///   d(tau)  = sum_{j < integration} (x[s+j] - x[s+j+tau])^2
///   d'(0)   = 1, d'(tau) = d(tau) * tau / sum_{u=1..tau} d(u)
/// and d'(tau) = 1 where the running sum is zero (silence guard). Samples
/// outside the signal read as zero.
struct CmndShape {
  std::size_t integration = 0;
  std::size_t max_lag = 0;
};

namespace serial {
void gemm(const GemmShape& s, const double* a, const double* b, double* c);
void cmnd_rows(std::span<const double> x, std::span<const std::int64_t> starts,
               const CmndShape& shape, double* out);
/// y[n] = sum_k taps[k] * x[n + k - L/2] with zeros outside x; for the
/// symmetric low-pass taps this is a zero-phase convolution.
void fir_zero_phase(std::span<const double> x, std::span<const double> taps,
                    std::span<double> y);
/// One Viterbi recursion over a banded transition matrix.
/// next[j] = max_{|i-j|<=band} (prev[i] + log_trans[i*B + j]) + log_obs[j];
/// ties resolved toward the lower i. back[j] receives the chosen i.
void viterbi_step(std::span<const double> prev, std::span<const double> log_trans,
                  std::span<const double> log_obs, std::size_t band,
                  std::span<double> next, std::span<std::int32_t> back);
}  // namespace serial

namespace omp {
void gemm(const GemmShape& s, const double* a, const double* b, double* c);
void cmnd_rows(std::span<const double> x, std::span<const std::int64_t> starts,
               const CmndShape& shape, double* out);
void fir_zero_phase(std::span<const double> x, std::span<const double> taps,
                    std::span<double> y);
void viterbi_step(std::span<const double> prev, std::span<const double> log_trans,
                  std::span<const double> log_obs, std::size_t band,
                  std::span<double> next, std::span<std::int32_t> back);
}  // namespace omp

}  // namespace prosody::kernels
