// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/features.hpp"
#include "prosody/pitch.hpp"
#include "prosody/rng.hpp"

namespace prosody::baselines {

/// Voiced frames set to 2^mu; unvoiced frames untouched.
pitch::F0Contour monotone(const pitch::F0Contour& contour, const pitch::SpeakerStats& stats);

/// Random permutation of word contours, each resampled in log2-Hz to the
/// voiced length of the word it lands on.
pitch::F0Contour swap_words(const pitch::F0Contour& contour, const features::Alignment& align,
                            RngStream& rng);

struct BankEntry {
  std::string speaker;
  std::string word;
  std::vector<double> log2_hz;  // voiced frames only, nonempty
};

struct WordContourBank {
  std::vector<BankEntry> entries;

  /// Adds every word with at least one voiced frame.
  void add_utterance(const std::string& speaker, const pitch::F0Contour& contour,
                     const features::Alignment& align);
  std::size_t count_for(const std::string& speaker) const;
  nlohmann::json to_json() const;
  static WordContourBank from_json(const nlohmann::json& j);
};

/// Every word independently takes a uniformly drawn bank contour of the same
/// speaker, resampled to its voiced length.
pitch::F0Contour replace_words(const pitch::F0Contour& contour, const features::Alignment& align,
                               const WordContourBank& bank, const std::string& speaker,
                               RngStream& rng);

enum class Punctuation { kQuestion, kStatement };

/// Voiced frames of the last two words follow a linear ramp from mu to
/// mu + 2 sigma (question) or mu - 2 sigma (statement).
pitch::F0Contour repunctuate_heuristic(const pitch::F0Contour& contour,
                                       const features::Alignment& align, Punctuation target,
                                       const pitch::SpeakerStats& stats);

/// Linear interpolation of `x` onto `n` evenly spaced points spanning the
/// same extent; identity when n == x.size().
std::vector<double> resample_linear(std::span<const double> x, std::size_t n);

/// Voiced frame indices of each word.
std::vector<std::vector<std::size_t>> word_voiced_frames(const pitch::F0Contour& contour,
                                                         const features::Alignment& align);

}  // namespace prosody::baselines
