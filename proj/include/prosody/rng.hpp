// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace prosody {

/// Counter-based random stream.
///
/// Draw n of a stream is splitmix64_finalize(key + (n + 1) * 0x9E3779B97F4A7C15),
/// so the value at any position depends only on (key, n) and is identical on
/// every platform. `split(i)` derives an independent child key; training uses
/// one child per (step, utterance) so results do not depend on thread schedule.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (consumes two draws).
  double normal();

  RngStream split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  RngStream(std::uint64_t seed, std::uint64_t key, std::uint64_t counter, bool)
      : seed_(seed), key_(key), counter_(counter) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace prosody
