// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace prosody::audio {

inline constexpr int kCanonicalRate = 16000;
inline constexpr double kHopSeconds = 0.010;

/// Mono waveform with samples in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kCanonicalRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// 10 ms frame grid. Frame t covers samples starting at t * hop.
struct FrameGrid {
  int sample_rate = kCanonicalRate;
  std::size_t hop = 160;
  std::size_t frame_count = 0;

  static FrameGrid for_audio(const AudioBuffer& audio);
  static FrameGrid for_frames(std::size_t frames, int sample_rate = kCanonicalRate);

  double frame_center_seconds(std::size_t t) const {
    return (static_cast<double>(t) + 0.5) * static_cast<double>(hop) / sample_rate;
  }
  std::size_t frame_center_sample(std::size_t t) const { return t * hop + hop / 2; }
};

std::size_t hop_samples(int sample_rate);

// WAV (RIFF) ingestion and output.
AudioBuffer load_audio(std::span<const std::uint8_t> bytes, int target_rate = kCanonicalRate);
AudioBuffer load_audio(const std::filesystem::path& path, int target_rate = kCanonicalRate);
/// 16-bit PCM little-endian mono.
std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

/// Band-limited (Kaiser windowed sinc) rate conversion.
std::vector<double> resample(std::span<const double> input, int from_rate, int to_rate);

// mu-law companding; mu = levels - 1.
int mulaw_encode(double x, int levels = 1024);
double mulaw_decode(int level, int levels = 1024);

struct McepConfig {
  std::size_t order = 21;
  std::size_t mel_bands = 80;
  double window_seconds = 0.025;
  std::size_t fft_size = 1024;
  double log_floor = 1e-10;
};

/// Row-major T x order matrix of filterbank cepstra.
struct CepstrumMatrix {
  std::size_t frames = 0;
  std::size_t order = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t c) const { return values[t * order + c]; }
};

CepstrumMatrix mcep_extract(const AudioBuffer& audio, const FrameGrid& grid,
                            const McepConfig& config = {});

/// Triangular mel filterbank, bands x (fft_size/2 + 1), row-major.
std::vector<double> mel_filterbank(std::size_t bands, std::size_t fft_size, int sample_rate);

/// Kaiser windowed-sinc low-pass taps: passband edge `cutoff`, stopband edge
/// cutoff + 20 Hz, at least 60 dB stopband attenuation. Odd length, unit DC gain.
std::vector<double> lowpass_taps(double cutoff, int sample_rate);

/// Zero-phase FIR low-pass; output length equals input length.
AudioBuffer lowpass_render(const AudioBuffer& audio, double cutoff);

}  // namespace prosody::audio
