// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "prosody/pitch.hpp"

namespace prosody::codec {

inline constexpr int kClasses = 128;
inline constexpr int kUnvoicedBin = 0;
inline constexpr int kVoicedBins = kClasses - 1;

/// Speaker-adaptive grid: 127 voiced bins evenly spanning mu +/- 4 sigma in
/// log2-Hz, plus bin 0 for unvoiced frames.
struct QuantGrid {
  double mu = 0.0;
  double sigma = 0.0;

  double lo() const { return mu - 4.0 * sigma; }
  double hi() const { return mu + 4.0 * sigma; }
  double bin_width() const { return (hi() - lo()) / kVoicedBins; }
  /// Center of voiced bin k (1..127) in log2-Hz.
  double center(int bin) const;
};

struct QuantizedF0 {
  std::vector<int> bins;
  std::size_t size() const { return bins.size(); }
};

QuantGrid build_grid(const pitch::SpeakerStats& stats);

int quantize_hz(double hz, const QuantGrid& grid);
QuantizedF0 quantize(const pitch::F0Contour& contour, const QuantGrid& grid);
pitch::F0Contour dequantize(const QuantizedF0& q, const QuantGrid& grid);

}  // namespace prosody::codec
