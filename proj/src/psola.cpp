// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/psola.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "prosody/error.hpp"

namespace prosody::psola {

namespace {

const char* const kComponent = "psola_vocoder";

struct Region {
  std::size_t first_frame, last_frame;  // inclusive
  bool voiced;
};

std::vector<Region> regions_of(const std::vector<bool>& voiced) {
  std::vector<Region> out;
  for (std::size_t t = 0; t < voiced.size();) {
    std::size_t e = t;
    while (e + 1 < voiced.size() && voiced[e + 1] == voiced[t]) ++e;
    out.push_back({t, e, voiced[t]});
    t = e + 1;
  }
  return out;
}

// Sample span of a frame region; the last region absorbs trailing samples.
std::pair<std::size_t, std::size_t> sample_span(const Region& r, std::size_t frames, std::size_t hop,
                                                std::size_t total) {
  const std::size_t a = std::min(total, r.first_frame * hop);
  const std::size_t b = r.last_frame + 1 == frames ? total : std::min(total, (r.last_frame + 1) * hop);
  return {a, b};
}

std::size_t frame_of(double sample, std::size_t hop, std::size_t frames) {
  if (sample <= 0.0) return 0;
  return std::min(frames - 1, static_cast<std::size_t>(sample) / hop);
}

}  // namespace

PitchMarks detect_pitch_marks(const audio::AudioBuffer& audio, const pitch::F0Contour& contour) {
  contour.validate();
  const std::size_t hop = audio::hop_samples(audio.sample_rate);
  const std::size_t total = audio.samples.size();
  const std::size_t frames = contour.size();
  if (frames < total / hop)
    throw invalid_argument(kComponent, "contour has " + std::to_string(frames) + " frames, audio needs " +
                                           std::to_string(total / hop));
  PitchMarks marks;
  if (frames == 0 || total == 0) return marks;
  const double sr = audio.sample_rate;

  for (const Region& r : regions_of(contour.voiced)) {
    const auto [a, b] = sample_span(r, frames, hop, total);
    if (a >= b) continue;
    if (!r.voiced) {
      for (std::size_t s = a; s < b; s += hop) {
        marks.positions.push_back(s);
        marks.voiced.push_back(false);
      }
      continue;
    }
    std::vector<double> f0(contour.hz.begin() + static_cast<long>(r.first_frame),
                           contour.hz.begin() + static_cast<long>(r.last_frame + 1));
    std::nth_element(f0.begin(), f0.begin() + static_cast<long>(f0.size() / 2), f0.end());
    const double median = f0[f0.size() / 2];
    const std::size_t pad = static_cast<std::size_t>(0.1 * sr);
    const std::size_t pa = a > pad ? a - pad : 0;
    const std::size_t pb = std::min(total, b + pad);
    audio::AudioBuffer seg;
    seg.sample_rate = audio.sample_rate;
    seg.samples.assign(audio.samples.begin() + static_cast<long>(pa), audio.samples.begin() + static_cast<long>(pb));
    const auto smooth = audio::lowpass_render(seg, std::min(1.5 * median, 0.45 * sr)).samples;
    auto value = [&](std::size_t s) { return smooth[s - pa]; };
    auto argmax = [&](std::size_t lo, std::size_t hi) {
      std::size_t best = lo;
      for (std::size_t s = lo; s < hi; ++s)
        if (value(s) > value(best)) best = s;
      return best;
    };
    auto period_at = [&](std::size_t s) { return sr / contour.hz[frame_of(static_cast<double>(s), hop, frames)]; };

    std::size_t mark = argmax(a, std::min(b, a + static_cast<std::size_t>(std::ceil(period_at(a)))));
    while (true) {
      if (!marks.positions.empty() && mark <= marks.positions.back()) break;
      marks.positions.push_back(mark);
      marks.voiced.push_back(true);
      const double p = period_at(mark);
      const auto lo = mark + static_cast<std::size_t>(std::ceil(0.75 * p));
      const auto hi = mark + static_cast<std::size_t>(std::floor(1.25 * p)) + 1;
      if (lo >= b) break;
      mark = argmax(lo, std::min(hi, b));
    }
  }
  return marks;
}

SynthesisPlan plan_marks(const PitchMarks& marks, const pitch::F0Contour& analysis,
                         const pitch::F0Contour& target, int sample_rate) {
  analysis.validate();
  target.validate();
  if (analysis.size() != target.size())
    throw data_error(kComponent, "target has " + std::to_string(target.size()) + " frames, analysis has " +
                                     std::to_string(analysis.size()));
  for (std::size_t t = 0; t < target.size(); ++t)
    if (analysis.voiced[t] != target.voiced[t])
      throw data_error(kComponent, "V/UV mismatch between target and analysis at frame " + std::to_string(t));
  const std::size_t hop = audio::hop_samples(sample_rate);
  const std::size_t frames = target.size();

  SynthesisPlan plan;
  plan.frame_voiced = target.voiced;
  const std::size_t n = marks.size();
  for (std::size_t i = 0; i < n;) {
    if (!marks.voiced[i]) {
      plan.positions.push_back(static_cast<double>(marks.positions[i]));
      plan.source.push_back(i);
      plan.voiced.push_back(false);
      ++i;
      continue;
    }
    // Voiced run of analysis marks [i, j).
    std::size_t j = i;
    while (j < n && marks.voiced[j]) ++j;
    const double end = j < n ? static_cast<double>(marks.positions[j])
                             : static_cast<double>(std::max(marks.positions[j - 1] + 1, frames * hop));
    auto spacing = [&](std::size_t k) {
      if (j - i < 2) return sample_rate / analysis.hz[frame_of(static_cast<double>(marks.positions[k]), hop, frames)];
      const std::size_t a = k + 1 < j ? k : k - 1;
      return static_cast<double>(marks.positions[a + 1] - marks.positions[a]);
    };
    double pos = static_cast<double>(marks.positions[i]);
    std::size_t nearest = i;
    while (pos < end) {
      while (nearest + 1 < j &&
             std::abs(static_cast<double>(marks.positions[nearest + 1]) - pos) <=
                 std::abs(static_cast<double>(marks.positions[nearest]) - pos))
        ++nearest;
      plan.positions.push_back(pos);
      plan.source.push_back(nearest);
      plan.voiced.push_back(true);
      const std::size_t f = frame_of(pos, hop, frames);
      pos += spacing(nearest) * analysis.hz[f] / target.hz[f];
    }
    i = j;
  }
  return plan;
}

audio::AudioBuffer synthesize(const audio::AudioBuffer& audio, const PitchMarks& marks,
                              const SynthesisPlan& plan) {
  const std::size_t total = audio.samples.size();
  const std::size_t hop = audio::hop_samples(audio.sample_rate);
  const std::size_t frames = plan.frame_voiced.size();
  if (plan.positions.size() != plan.source.size())
    throw invalid_argument(kComponent, "plan positions and sources differ in length");
  for (std::size_t s : plan.source)
    if (s >= marks.size()) throw invalid_argument(kComponent, "plan references a missing analysis mark");

  audio::AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.assign(total, 0.0);
  if (frames == 0) {
    out.samples = audio.samples;
    return out;
  }
  std::vector<double> env(total, 0.0);
  auto frame_voiced = [&](std::size_t s) { return plan.frame_voiced[std::min(frames - 1, s / hop)]; };

  auto local_period = [&](std::size_t k) {
    double sum = 0.0;
    int count = 0;
    if (k > 0 && marks.voiced[k - 1]) {
      sum += static_cast<double>(marks.positions[k] - marks.positions[k - 1]);
      ++count;
    }
    if (k + 1 < marks.size() && marks.voiced[k + 1]) {
      sum += static_cast<double>(marks.positions[k + 1] - marks.positions[k]);
      ++count;
    }
    return count ? sum / count : static_cast<double>(hop);
  };

  for (std::size_t m = 0; m < plan.positions.size(); ++m) {
    if (!plan.voiced[m]) continue;
    const std::size_t src = plan.source[m];
    const double period = local_period(src);
    const long reach = static_cast<long>(std::floor(period));
    const double target = plan.positions[m];
    const long base = static_cast<long>(std::floor(target));
    const double frac = target - static_cast<double>(base);
    const long centre = static_cast<long>(marks.positions[src]);
    for (long d = -reach; d <= reach; ++d) {
      const long s = centre + d;
      if (s < 0 || s >= static_cast<long>(total)) continue;
      const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(d) / period));
      const double x = audio.samples[static_cast<std::size_t>(s)] * w;
      const long o = base + d;
      if (o >= 0 && o < static_cast<long>(total)) {
        out.samples[static_cast<std::size_t>(o)] += (1.0 - frac) * x;
        env[static_cast<std::size_t>(o)] += (1.0 - frac) * w;
      }
      if (frac > 0.0 && o + 1 >= 0 && o + 1 < static_cast<long>(total)) {
        out.samples[static_cast<std::size_t>(o + 1)] += frac * x;
        env[static_cast<std::size_t>(o + 1)] += frac * w;
      }
    }
  }
  for (std::size_t s = 0; s < total; ++s) {
    if (!frame_voiced(s)) out.samples[s] = audio.samples[s];
    else out.samples[s] /= std::max(env[s], 1e-3);
  }
  return out;
}

audio::AudioBuffer shift(const audio::AudioBuffer& audio, const pitch::F0Contour& analysis,
                         const pitch::F0Contour& target) {
  const auto marks = detect_pitch_marks(audio, analysis);
  const auto plan = plan_marks(marks, analysis, target, audio.sample_rate);
  return synthesize(audio, marks, plan);
}

}  // namespace prosody::psola
