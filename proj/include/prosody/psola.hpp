// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "prosody/audio.hpp"
#include "prosody/pitch.hpp"

namespace prosody::psola {

struct PitchMarks {
  std::vector<std::size_t> positions;  // strictly increasing sample indices
  std::vector<bool> voiced;
  std::size_t size() const { return positions.size(); }
};

struct SynthesisPlan {
  std::vector<double> positions;       // target mark times in samples
  std::vector<std::size_t> source;     // analysis mark index per target mark
  std::vector<bool> voiced;            // per target mark
  std::vector<bool> frame_voiced;      // V/UV per 10 ms frame
};

/// Voiced regions: maxima of the waveform low-passed at 1.5x the region's
/// median F0, each searched within 0.75-1.25 local periods of the previous
/// mark. Unvoiced regions: a mark every 10 ms.
PitchMarks detect_pitch_marks(const audio::AudioBuffer& audio, const pitch::F0Contour& contour);

/// Lays target marks left to right: voiced spacing is the local analysis
/// spacing scaled by analysis_hz / target_hz, unvoiced marks are copied.
/// Each target mark uses the nearest analysis mark of its region.
SynthesisPlan plan_marks(const PitchMarks& marks, const pitch::F0Contour& analysis,
                         const pitch::F0Contour& target, int sample_rate);

/// Overlap-add of two-period Hann grains with envelope normalization;
/// unvoiced frames are copied from the source.
audio::AudioBuffer synthesize(const audio::AudioBuffer& audio, const PitchMarks& marks,
                              const SynthesisPlan& plan);

/// Marks, plan and synthesis in one call.
audio::AudioBuffer shift(const audio::AudioBuffer& audio, const pitch::F0Contour& analysis,
                         const pitch::F0Contour& target);

}  // namespace prosody::psola
