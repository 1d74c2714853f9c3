// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/codec.hpp"

#include <algorithm>
#include <cmath>

#include "prosody/error.hpp"

namespace prosody::codec {

namespace {
const char* const kComponent = "f0_codec";
}

double QuantGrid::center(int bin) const {
  return lo() + (static_cast<double>(bin) - 0.5) * bin_width();
}

QuantGrid build_grid(const pitch::SpeakerStats& stats) {
  if (!std::isfinite(stats.mu) || !(stats.sigma >= pitch::kSigmaFloor) || !std::isfinite(stats.sigma))
    throw invalid_argument(kComponent, "build_grid: invalid speaker stats");
  return QuantGrid{stats.mu, stats.sigma};
}

int quantize_hz(double hz, const QuantGrid& grid) {
  if (!(hz > 0.0) || !std::isfinite(hz)) return 1;
  const double pos = std::floor((std::log2(hz) - grid.lo()) / (grid.hi() - grid.lo()) * kVoicedBins);
  return static_cast<int>(std::clamp(1.0 + pos, 1.0, static_cast<double>(kVoicedBins)));
}

QuantizedF0 quantize(const pitch::F0Contour& contour, const QuantGrid& grid) {
  contour.validate();
  QuantizedF0 q;
  q.bins.resize(contour.size());
  for (std::size_t t = 0; t < contour.size(); ++t)
    q.bins[t] = contour.voiced[t] ? quantize_hz(contour.hz[t], grid) : kUnvoicedBin;
  return q;
}

pitch::F0Contour dequantize(const QuantizedF0& q, const QuantGrid& grid) {
  pitch::F0Contour c;
  c.hz.resize(q.size());
  c.voiced.resize(q.size());
  for (std::size_t t = 0; t < q.size(); ++t) {
    const int b = q.bins[t];
    if (b < 0 || b >= kClasses)
      throw invalid_argument(kComponent, "dequantize: bin " + std::to_string(b) + " at frame " +
                                             std::to_string(t) + " out of range");
    c.voiced[t] = b != kUnvoicedBin;
    // Unvoiced frames carry the grid center so the contour stays positive.
    c.hz[t] = std::exp2(b == kUnvoicedBin ? grid.mu : grid.center(b));
  }
  return c;
}

}  // namespace prosody::codec
