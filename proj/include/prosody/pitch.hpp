// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prosody/audio.hpp"

namespace prosody::pitch {

inline constexpr double kReferenceHz = 32.70;
inline constexpr double kCentsPerBin = 20.0;
inline constexpr std::size_t kBins = 360;
/// 240 cents at 20 cents per bin.
inline constexpr std::size_t kMaxJumpBins = 12;

double bin_to_hz(double bin, double reference_hz = kReferenceHz,
                 double cents_per_bin = kCentsPerBin);
double hz_to_bin(double hz, double reference_hz = kReferenceHz,
                 double cents_per_bin = kCentsPerBin);
double cents_between(double hz_a, double hz_b);

/// T x B per-frame distribution over pitch bins; rows sum to one.
class Posteriorgram {
 public:
  Posteriorgram() = default;
  /// Rows are renormalized; throws on negative, non-finite or all-zero rows.
  Posteriorgram(std::size_t frames, std::size_t bins, std::vector<double> values,
                double reference_hz = kReferenceHz, double cents_per_bin = kCentsPerBin);

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return bins_; }
  double reference_hz() const { return reference_hz_; }
  double cents_per_bin() const { return cents_per_bin_; }
  double at(std::size_t t, std::size_t b) const { return values_[t * bins_ + b]; }
  std::span<const double> row(std::size_t t) const {
    return {values_.data() + t * bins_, bins_};
  }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t frames_ = 0;
  std::size_t bins_ = 0;
  double reference_hz_ = kReferenceHz;
  double cents_per_bin_ = kCentsPerBin;
  std::vector<double> values_;
};

struct HarmonicityTrack {
  std::vector<double> confidence;
};

struct F0Contour {
  std::vector<double> hz;
  std::vector<bool> voiced;

  std::size_t size() const { return hz.size(); }
  std::size_t voiced_count() const;
  /// Throws unless sizes agree and voiced frames carry finite positive hz.
  void validate() const;
};

struct SpeakerStats {
  double mu = 0.0;     // mean log2(hz)
  double sigma = 0.0;  // std of log2(hz), floored
  std::size_t frame_count = 0;
};

inline constexpr double kSigmaFloor = 0.05;

struct AnalysisConfig {
  double t_high = 0.6;
  double t_low = 0.4;
  double window_seconds = 0.064;
};

struct PosteriorResult {
  Posteriorgram posteriorgram;
  HarmonicityTrack harmonicity;
};

PosteriorResult candidate_posteriorgram(const audio::AudioBuffer& audio,
                                        const audio::FrameGrid& grid,
                                        const AnalysisConfig& config = {});

/// Little-endian "PGRM" layout: magic, u32 T, u32 B, f32 reference_hz,
/// f32 cents_per_bin, T*B f32 row-major values, T f32 confidences.
std::vector<std::uint8_t> export_posteriorgram(const PosteriorResult& result);
PosteriorResult ingest_posteriorgram(std::span<const std::uint8_t> bytes);
PosteriorResult ingest_posteriorgram(const std::filesystem::path& path);

/// Row-normalized banded transition log-probabilities, B x B.
std::vector<double> transition_log_matrix(std::size_t bins, std::size_t max_jump = kMaxJumpBins);

std::vector<std::int32_t> viterbi_decode(const Posteriorgram& post);

std::vector<bool> vuv_from_confidence(const HarmonicityTrack& conf, double t_high, double t_low);

SpeakerStats speaker_stats(std::span<const F0Contour> contours);

F0Contour analyze(const audio::AudioBuffer& audio, const AnalysisConfig& config = {});

}  // namespace prosody::pitch
