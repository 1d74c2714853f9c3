// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#include "prosody/audio.hpp"
#include "prosody/error.hpp"
#include "prosody/kernels.hpp"

namespace prosody::audio {

namespace {

const char* const kComponent = "audio_io";

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// FFTW planning is not thread safe; execution on fresh arrays is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    {
      std::lock_guard<std::mutex> lock(fftw_plan_mutex());
      plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    fftw_free(in);
    fftw_free(out);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  void magnitude(std::vector<double>& input, std::vector<double>& mag) const {
    std::vector<fftw_complex> spec(n_ / 2 + 1);
    fftw_execute_dft_r2c(plan_, input.data(), spec.data());
    for (std::size_t k = 0; k < spec.size(); ++k) mag[k] = std::hypot(spec[k][0], spec[k][1]);
  }

 private:
  std::size_t n_;
  fftw_plan plan_;
};

}  // namespace

std::size_t hop_samples(int sample_rate) {
  return static_cast<std::size_t>(std::lround(kHopSeconds * sample_rate));
}

FrameGrid FrameGrid::for_audio(const AudioBuffer& audio) {
  FrameGrid g;
  g.sample_rate = audio.sample_rate;
  g.hop = hop_samples(audio.sample_rate);
  g.frame_count = audio.samples.size() / g.hop;
  return g;
}

FrameGrid FrameGrid::for_frames(std::size_t frames, int sample_rate) {
  FrameGrid g;
  g.sample_rate = sample_rate;
  g.hop = hop_samples(sample_rate);
  g.frame_count = frames;
  return g;
}

int mulaw_encode(double x, int levels) {
  if (!std::isfinite(x)) throw invalid_argument(kComponent, "mulaw_encode: non-finite input");
  if (levels < 2) throw invalid_argument(kComponent, "mulaw_encode: need at least two levels");
  x = std::clamp(x, -1.0, 1.0);
  const double mu = levels - 1;
  const double y = std::copysign(std::log1p(mu * std::fabs(x)) / std::log1p(mu), x);
  const double level = std::floor((y + 1.0) / 2.0 * levels);
  return static_cast<int>(std::clamp(level, 0.0, static_cast<double>(levels - 1)));
}

double mulaw_decode(int level, int levels) {
  if (levels < 2 || level < 0 || level >= levels)
    throw invalid_argument(kComponent, "mulaw_decode: level " + std::to_string(level) +
                                           " out of range for " + std::to_string(levels));
  const double mu = levels - 1;
  const double y = (static_cast<double>(level) + 0.5) / levels * 2.0 - 1.0;
  return std::copysign(std::expm1(std::fabs(y) * std::log1p(mu)) / mu, y);
}

std::vector<double> mel_filterbank(std::size_t bands, std::size_t fft_size, int sample_rate) {
  const std::size_t bins = fft_size / 2 + 1;
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(bands + 1));
  std::vector<double> fb(bands * bins, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb[b * bins + k] = w;
    }
  }
  return fb;
}

CepstrumMatrix mcep_extract(const AudioBuffer& audio, const FrameGrid& grid,
                            const McepConfig& config) {
  const std::size_t window =
      static_cast<std::size_t>(std::lround(config.window_seconds * audio.sample_rate));
  if (audio.samples.size() < window)
    throw invalid_argument(kComponent, "mcep_extract: audio shorter than one analysis window");
  if (config.order == 0 || config.order > config.mel_bands || config.fft_size < window)
    throw invalid_argument(kComponent, "mcep_extract: inconsistent configuration");

  const std::size_t bins = config.fft_size / 2 + 1;
  const auto fb = mel_filterbank(config.mel_bands, config.fft_size, audio.sample_rate);
  std::vector<double> hann(window);
  for (std::size_t n = 0; n < window; ++n)
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(window - 1));

  // Orthonormal DCT-II basis, order x bands.
  const std::size_t nb = config.mel_bands;
  std::vector<double> dct(config.order * nb);
  for (std::size_t k = 0; k < config.order; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / nb) : std::sqrt(2.0 / nb);
    for (std::size_t n = 0; n < nb; ++n)
      dct[k * nb + n] = scale * std::cos(M_PI * static_cast<double>(k) * (2.0 * n + 1.0) / (2.0 * nb));
  }

  CepstrumMatrix out;
  out.frames = grid.frame_count;
  out.order = config.order;
  out.values.assign(out.frames * out.order, 0.0);
  const RealFft fft(config.fft_size);
  const double floor_log = std::log(config.log_floor);
  const long frames = static_cast<long>(grid.frame_count);
  const long size = static_cast<long>(audio.samples.size());

#pragma omp parallel
  {
    std::vector<double> buf(config.fft_size);
    std::vector<double> mag(bins);
    std::vector<double> logmel(nb);
#pragma omp for schedule(static)
    for (long t = 0; t < frames; ++t) {
      const long start = static_cast<long>(grid.frame_center_sample(static_cast<std::size_t>(t))) -
                         static_cast<long>(window / 2);
      std::fill(buf.begin(), buf.end(), 0.0);
      for (std::size_t n = 0; n < window; ++n) {
        const long i = start + static_cast<long>(n);
        if (i >= 0 && i < size) buf[n] = audio.samples[static_cast<std::size_t>(i)] * hann[n];
      }
      fft.magnitude(buf, mag);
      for (std::size_t b = 0; b < nb; ++b) {
        double e = 0.0;
        for (std::size_t k = 0; k < bins; ++k) e += fb[b * bins + k] * mag[k];
        logmel[b] = e > config.log_floor ? std::log(e) : floor_log;
      }
      double* row = out.values.data() + static_cast<std::size_t>(t) * out.order;
      for (std::size_t k = 0; k < out.order; ++k) {
        double acc = 0.0;
        for (std::size_t n = 0; n < nb; ++n) acc += dct[k * nb + n] * logmel[n];
        row[k] = acc;
      }
    }
  }
  return out;
}

std::vector<double> lowpass_taps(double cutoff, int sample_rate) {
  constexpr double kTransitionHz = 20.0;
  constexpr double kAttenuationDb = 65.0;
  const double nyquist = sample_rate / 2.0;
  if (!(cutoff > 0.0 && cutoff < nyquist))
    throw invalid_argument(kComponent, "lowpass cutoff " + std::to_string(cutoff) +
                                           " Hz outside (0, Nyquist)");
  const double beta = 0.1102 * (kAttenuationDb - 8.7);
  const double delta_omega = 2.0 * M_PI * kTransitionHz / sample_rate;
  std::size_t length =
      static_cast<std::size_t>(std::ceil((kAttenuationDb - 8.0) / (2.285 * delta_omega))) + 1;
  if (length % 2 == 0) ++length;
  const double half = static_cast<double>(length - 1) / 2.0;
  const double fc = std::min(cutoff + kTransitionHz / 2.0, nyquist) / sample_rate;  // cycles/sample
  const double norm = std::cyl_bessel_i(0.0, beta);

  std::vector<double> taps(length);
  double sum = 0.0;
  for (std::size_t n = 0; n < length; ++n) {
    const double m = static_cast<double>(n) - half;
    const double r = m / half;
    const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    const double arg = 2.0 * fc * m;
    const double sinc = m == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
    taps[n] = 2.0 * fc * sinc * w;
    sum += taps[n];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

AudioBuffer lowpass_render(const AudioBuffer& audio, double cutoff) {
  const auto taps = lowpass_taps(cutoff, audio.sample_rate);
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.resize(audio.samples.size());
  kernels::omp::fir_zero_phase(audio.samples, taps, out.samples);
  return out;
}

}  // namespace prosody::audio
