// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/pitch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "prosody/error.hpp"
#include "prosody/kernels.hpp"

namespace prosody::pitch {

namespace {

const char* const kComponent = "pitch_analysis";
constexpr double kSpreadCents = 25.0;
// Salience is scaled down by this much per octave of lag above the shortest
// grid lag, so the fundamental outranks the subharmonic dips at k * period.
constexpr double kOctavePenalty = 0.1;
// Added to every salience bin so no path is ever infeasible.
constexpr double kSalienceFloor = 1e-9;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw data_error(kComponent, "posteriorgram file truncated");
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

double bin_to_hz(double bin, double reference_hz, double cents_per_bin) {
  return reference_hz * std::exp2(bin * cents_per_bin / 1200.0);
}

double hz_to_bin(double hz, double reference_hz, double cents_per_bin) {
  return 1200.0 * std::log2(hz / reference_hz) / cents_per_bin;
}

double cents_between(double hz_a, double hz_b) { return 1200.0 * std::log2(hz_b / hz_a); }

Posteriorgram::Posteriorgram(std::size_t frames, std::size_t bins, std::vector<double> values,
                             double reference_hz, double cents_per_bin)
    : frames_(frames),
      bins_(bins),
      reference_hz_(reference_hz),
      cents_per_bin_(cents_per_bin),
      values_(std::move(values)) {
  if (values_.size() != frames_ * bins_)
    throw data_error(kComponent, "posteriorgram dimension mismatch: expected " +
                                     std::to_string(frames_ * bins_) + " values, got " +
                                     std::to_string(values_.size()));
  if (bins_ == 0) throw data_error(kComponent, "posteriorgram needs at least one bin");
  for (std::size_t t = 0; t < frames_; ++t) {
    double sum = 0.0;
    for (std::size_t b = 0; b < bins_; ++b) {
      const double v = values_[t * bins_ + b];
      if (!std::isfinite(v) || v < 0.0)
        throw data_error(kComponent, "posteriorgram entry (" + std::to_string(t) + ", " +
                                         std::to_string(b) + ") is negative or non-finite");
      sum += v;
    }
    if (!(sum > 0.0)) throw data_error(kComponent, "degenerate row " + std::to_string(t) + ": all zeros");
    for (std::size_t b = 0; b < bins_; ++b) values_[t * bins_ + b] /= sum;
  }
}

std::size_t F0Contour::voiced_count() const {
  return static_cast<std::size_t>(std::count(voiced.begin(), voiced.end(), true));
}

void F0Contour::validate() const {
  if (hz.size() != voiced.size())
    throw data_error(kComponent, "contour hz/voiced length mismatch");
  for (std::size_t t = 0; t < hz.size(); ++t)
    if (voiced[t] && !(std::isfinite(hz[t]) && hz[t] > 0.0))
      throw data_error(kComponent, "voiced frame " + std::to_string(t) + " has invalid hz");
}

PosteriorResult candidate_posteriorgram(const audio::AudioBuffer& audio,
                                        const audio::FrameGrid& grid,
                                        const AnalysisConfig& config) {
  const int sr = audio.sample_rate;
  const std::size_t window = static_cast<std::size_t>(std::lround(config.window_seconds * sr));
  if (audio.samples.size() < window)
    throw invalid_argument(kComponent, "audio shorter than one analysis window");

  // Lags covering the bin grid.
  std::vector<double> lag(kBins);
  for (std::size_t b = 0; b < kBins; ++b) lag[b] = sr / bin_to_hz(static_cast<double>(b));
  const double min_lag = lag.back();
  const std::size_t max_lag = static_cast<std::size_t>(std::ceil(lag.front())) + 1;
  if (max_lag + 2 > window) throw invalid_argument(kComponent, "analysis window too short for grid");
  const kernels::CmndShape shape{window - max_lag, max_lag};
  const std::size_t lag_lo = static_cast<std::size_t>(std::floor(min_lag));

  const std::size_t frames = grid.frame_count;
  std::vector<std::int64_t> starts(frames);
  for (std::size_t t = 0; t < frames; ++t)
    starts[t] = static_cast<std::int64_t>(grid.frame_center_sample(t)) -
                static_cast<std::int64_t>(window / 2);
  std::vector<double> cmnd(frames * (max_lag + 1));
  kernels::omp::cmnd_rows(audio.samples, starts, shape, cmnd.data());

  // Gaussian spreading kernel over bins.
  const double sigma_bins = kSpreadCents / kCentsPerBin;
  const int reach = static_cast<int>(std::ceil(4.0 * sigma_bins));
  std::vector<double> gauss(2 * reach + 1);
  for (int k = -reach; k <= reach; ++k)
    gauss[k + reach] = std::exp(-0.5 * (k / sigma_bins) * (k / sigma_bins));

  std::vector<double> values(frames * kBins);
  HarmonicityTrack harmonicity;
  harmonicity.confidence.resize(frames);
  const long nframes = static_cast<long>(frames);
#pragma omp parallel for schedule(static)
  for (long tl = 0; tl < nframes; ++tl) {
    const std::size_t t = static_cast<std::size_t>(tl);
    const double* d = cmnd.data() + t * (max_lag + 1);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t tau = std::max<std::size_t>(1, lag_lo); tau <= max_lag; ++tau)
      dmin = std::min(dmin, d[tau]);
    harmonicity.confidence[t] = std::clamp(1.0 - dmin, 0.0, 1.0);

    std::vector<double> sal(kBins);
    for (std::size_t b = 0; b < kBins; ++b) {
      const double l = lag[b];
      const std::size_t i = static_cast<std::size_t>(std::floor(l));
      const double frac = l - static_cast<double>(i);
      const double dl = (1.0 - frac) * d[i] + frac * d[std::min(i + 1, max_lag)];
      const double weight = 1.0 - kOctavePenalty * std::log2(l / min_lag);
      sal[b] = std::max(0.0, 1.0 - dl) * weight;
    }
    // Only local maxima are spread, so each CMND dip becomes one 25-cent peak.
    std::vector<double> peaks(kBins, 0.0);
    for (std::size_t b = 0; b < kBins; ++b) {
      const double left = b > 0 ? sal[b - 1] : 0.0;
      const double right = b + 1 < kBins ? sal[b + 1] : 0.0;
      if (sal[b] > 0.0 && sal[b] >= left && sal[b] >= right) peaks[b] = sal[b];
    }
    double* row = values.data() + t * kBins;
    double sum = 0.0;
    for (std::size_t b = 0; b < kBins; ++b) {
      double acc = 0.0;
      for (int k = -reach; k <= reach; ++k) {
        const long j = static_cast<long>(b) + k;
        if (j >= 0 && j < static_cast<long>(kBins)) acc += gauss[k + reach] * peaks[static_cast<std::size_t>(j)];
      }
      row[b] = acc + kSalienceFloor;
      sum += row[b];
    }
    for (std::size_t b = 0; b < kBins; ++b) row[b] /= sum;
  }
  return {Posteriorgram(frames, kBins, std::move(values)), std::move(harmonicity)};
}

std::vector<std::uint8_t> export_posteriorgram(const PosteriorResult& result) {
  const auto& p = result.posteriorgram;
  std::vector<std::uint8_t> out;
  out.reserve(20 + 4 * (p.frames() * p.bins() + p.frames()));
  for (char c : {'P', 'G', 'R', 'M'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, static_cast<std::uint32_t>(p.frames()));
  put_u32(out, static_cast<std::uint32_t>(p.bins()));
  put_f32(out, static_cast<float>(p.reference_hz()));
  put_f32(out, static_cast<float>(p.cents_per_bin()));
  for (double v : p.values()) put_f32(out, static_cast<float>(v));
  for (std::size_t t = 0; t < p.frames(); ++t)
    put_f32(out, static_cast<float>(t < result.harmonicity.confidence.size()
                                        ? result.harmonicity.confidence[t]
                                        : 0.0));
  return out;
}

PosteriorResult ingest_posteriorgram(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), "PGRM", 4) != 0) throw data_error(kComponent, "bad posteriorgram magic");
  r.skip(4);
  const std::uint32_t frames = r.u32();
  const std::uint32_t bins = r.u32();
  const double reference = r.f32();
  const double cents = r.f32();
  if (frames == 0 || bins == 0) throw data_error(kComponent, "posteriorgram dimension mismatch: zero size");
  if (!(reference > 0.0) || !(cents > 0.0)) throw data_error(kComponent, "invalid posteriorgram grid");
  const std::size_t count = static_cast<std::size_t>(frames) * bins;
  r.need(4 * (count + frames));
  if (bytes.size() != r.pos() + 4 * (count + frames))
    throw data_error(kComponent, "posteriorgram dimension mismatch: trailing bytes");
  std::vector<double> values(count);
  for (auto& v : values) v = r.f32();
  HarmonicityTrack h;
  h.confidence.resize(frames);
  for (auto& c : h.confidence) {
    c = r.f32();
    if (!std::isfinite(c)) throw data_error(kComponent, "non-finite confidence");
    c = std::clamp(c, 0.0, 1.0);
  }
  return {Posteriorgram(frames, bins, std::move(values), reference, cents), std::move(h)};
}

PosteriorResult ingest_posteriorgram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(kComponent, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return ingest_posteriorgram(bytes);
}

std::vector<double> transition_log_matrix(std::size_t bins, std::size_t max_jump) {
  std::vector<double> logp(bins * bins, -std::numeric_limits<double>::infinity());
  const double limit = static_cast<double>(max_jump);
  for (std::size_t i = 0; i < bins; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < bins; ++j) {
      const double dist = std::fabs(static_cast<double>(i) - static_cast<double>(j));
      sum += std::max(0.0, 1.0 - dist / limit);
    }
    for (std::size_t j = 0; j < bins; ++j) {
      const double dist = std::fabs(static_cast<double>(i) - static_cast<double>(j));
      const double w = std::max(0.0, 1.0 - dist / limit);
      if (w > 0.0) logp[i * bins + j] = std::log(w / sum);
    }
  }
  return logp;
}

std::vector<std::int32_t> viterbi_decode(const Posteriorgram& post) {
  const std::size_t frames = post.frames();
  const std::size_t bins = post.bins();
  if (frames == 0) throw invalid_argument(kComponent, "viterbi_decode: empty posteriorgram");
  const auto log_trans = transition_log_matrix(bins);
  // The banded loop skips exactly the entries that are -inf.
  const std::size_t band = kMaxJumpBins;

  std::vector<double> log_obs(bins);
  auto load_obs = [&](std::size_t t) {
    for (std::size_t b = 0; b < bins; ++b) log_obs[b] = std::log(post.at(t, b));
  };
  load_obs(0);
  std::vector<double> delta(log_obs), next(bins);
  std::vector<std::int32_t> back(frames * bins, 0);
  for (std::size_t t = 1; t < frames; ++t) {
    load_obs(t);
    kernels::omp::viterbi_step(delta, log_trans, log_obs, band, next,
                               std::span<std::int32_t>(back.data() + t * bins, bins));
    std::swap(delta, next);
  }
  std::vector<std::int32_t> path(frames);
  std::int32_t best = 0;
  for (std::size_t b = 1; b < bins; ++b)
    if (delta[b] > delta[static_cast<std::size_t>(best)]) best = static_cast<std::int32_t>(b);
  path[frames - 1] = best;
  for (std::size_t t = frames - 1; t > 0; --t)
    path[t - 1] = back[t * bins + static_cast<std::size_t>(path[t])];
  return path;
}

std::vector<bool> vuv_from_confidence(const HarmonicityTrack& conf, double t_high, double t_low) {
  if (!(0.0 <= t_low && t_low <= t_high && t_high <= 1.0))
    throw invalid_argument(kComponent, "hysteresis thresholds must satisfy 0 <= t_low <= t_high <= 1");
  const auto& c = conf.confidence;
  std::vector<bool> voiced(c.size(), false);
  std::size_t t = 0;
  while (t < c.size()) {
    if (c[t] < t_low) {
      ++t;
      continue;
    }
    std::size_t end = t;
    bool seeded = false;
    while (end < c.size() && c[end] >= t_low) {
      seeded = seeded || c[end] >= t_high;
      ++end;
    }
    if (seeded)
      for (std::size_t i = t; i < end; ++i) voiced[i] = true;
    t = end;
  }
  return voiced;
}

SpeakerStats speaker_stats(std::span<const F0Contour> contours) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : contours)
    for (std::size_t t = 0; t < c.size(); ++t)
      if (c.voiced[t]) {
        sum += std::log2(c.hz[t]);
        ++n;
      }
  if (n == 0) throw data_error(kComponent, "speaker_stats: no voiced frames");
  const double mu = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& c : contours)
    for (std::size_t t = 0; t < c.size(); ++t)
      if (c.voiced[t]) {
        const double d = std::log2(c.hz[t]) - mu;
        ss += d * d;
      }
  SpeakerStats s;
  s.mu = mu;
  s.sigma = std::max(kSigmaFloor, std::sqrt(ss / static_cast<double>(n)));
  s.frame_count = n;
  return s;
}

F0Contour analyze(const audio::AudioBuffer& audio, const AnalysisConfig& config) {
  const auto grid = audio::FrameGrid::for_audio(audio);
  F0Contour out;
  if (grid.frame_count == 0) return out;
  const auto result = candidate_posteriorgram(audio, grid, config);
  out.voiced = vuv_from_confidence(result.harmonicity, config.t_high, config.t_low);
  // Unvoiced frames carry no pitch evidence; each voiced run is decoded on its own.
  const auto& p = result.posteriorgram;
  std::vector<double> values(p.values().begin(), p.values().end());
  for (std::size_t t = 0; t < p.frames(); ++t)
    if (!out.voiced[t])
      std::fill_n(values.begin() + static_cast<long>(t * p.bins()), p.bins(), 1.0 / static_cast<double>(p.bins()));
  const auto path = viterbi_decode(Posteriorgram(p.frames(), p.bins(), std::move(values)));
  out.hz.resize(path.size());
  for (std::size_t t = 0; t < path.size(); ++t) out.hz[t] = bin_to_hz(path[t]);
  return out;
}

}  // namespace prosody::pitch
