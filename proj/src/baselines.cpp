// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/baselines.hpp"

#include <cmath>
#include <numeric>

#include "prosody/audio.hpp"
#include "prosody/error.hpp"

namespace prosody::baselines {

namespace {

const char* const kComponent = "baselines";

std::vector<double> log2_at(const pitch::F0Contour& c, const std::vector<std::size_t>& frames) {
  std::vector<double> v;
  v.reserve(frames.size());
  for (auto t : frames) v.push_back(std::log2(c.hz[t]));
  return v;
}

void write_at(pitch::F0Contour& c, const std::vector<std::size_t>& frames, const std::vector<double>& log2_hz) {
  for (std::size_t k = 0; k < frames.size(); ++k) c.hz[frames[k]] = std::exp2(log2_hz[k]);
}

}  // namespace

std::vector<double> resample_linear(std::span<const double> x, std::size_t n) {
  if (x.empty()) throw invalid_argument(kComponent, "cannot resample an empty contour");
  if (n == x.size()) return {x.begin(), x.end()};
  std::vector<double> y(n);
  if (x.size() == 1) {
    std::fill(y.begin(), y.end(), x[0]);
    return y;
  }
  const double last = static_cast<double>(x.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = n == 1 ? last / 2.0 : last * static_cast<double>(i) / static_cast<double>(n - 1);
    const auto k = std::min(static_cast<std::size_t>(pos), x.size() - 2);
    const double f = pos - static_cast<double>(k);
    y[i] = x[k] * (1.0 - f) + x[k + 1] * f;
  }
  return y;
}

std::vector<std::vector<std::size_t>> word_voiced_frames(const pitch::F0Contour& contour,
                                                         const features::Alignment& align) {
  const auto grid = audio::FrameGrid::for_frames(contour.size());
  std::vector<std::vector<std::size_t>> out;
  for (const auto& w : align.words) {
    const auto [a, b] = features::word_frames(w, grid);
    std::vector<std::size_t> frames;
    for (std::size_t t = a; t < b && t < contour.size(); ++t)
      if (contour.voiced[t]) frames.push_back(t);
    out.push_back(std::move(frames));
  }
  return out;
}

pitch::F0Contour monotone(const pitch::F0Contour& contour, const pitch::SpeakerStats& stats) {
  contour.validate();
  pitch::F0Contour out = contour;
  const double hz = std::exp2(stats.mu);
  for (std::size_t t = 0; t < out.size(); ++t)
    if (out.voiced[t]) out.hz[t] = hz;
  return out;
}

pitch::F0Contour swap_words(const pitch::F0Contour& contour, const features::Alignment& align,
                            RngStream& rng) {
  contour.validate();
  if (align.words.empty()) throw invalid_argument(kComponent, "swap_words needs at least one word");
  const auto frames = word_voiced_frames(contour, align);
  std::vector<std::size_t> perm(frames.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  pitch::F0Contour out = contour;
  for (std::size_t w = 0; w < frames.size(); ++w) {
    const auto& src = frames[perm[w]];
    if (frames[w].empty() || src.empty()) continue;
    write_at(out, frames[w], resample_linear(log2_at(contour, src), frames[w].size()));
  }
  return out;
}

void WordContourBank::add_utterance(const std::string& speaker, const pitch::F0Contour& contour,
                                    const features::Alignment& align) {
  const auto frames = word_voiced_frames(contour, align);
  for (std::size_t w = 0; w < frames.size(); ++w) {
    if (frames[w].empty()) continue;
    entries.push_back({speaker, align.words[w].text, log2_at(contour, frames[w])});
  }
}

std::size_t WordContourBank::count_for(const std::string& speaker) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const BankEntry& e) { return e.speaker == speaker; }));
}

nlohmann::json WordContourBank::to_json() const {
  nlohmann::json j = {{"entries", nlohmann::json::array()}};
  for (const auto& e : entries)
    j["entries"].push_back({{"speaker", e.speaker}, {"word", e.word}, {"log2_hz", e.log2_hz}});
  return j;
}

WordContourBank WordContourBank::from_json(const nlohmann::json& j) {
  WordContourBank bank;
  try {
    for (const auto& e : j.at("entries")) {
      BankEntry b{e.at("speaker").get<std::string>(), e.at("word").get<std::string>(),
                  e.at("log2_hz").get<std::vector<double>>()};
      if (b.log2_hz.empty()) throw data_error(kComponent, "bank entry for '" + b.word + "' is empty");
      for (double v : b.log2_hz)
        if (!std::isfinite(v)) throw data_error(kComponent, "bank entry for '" + b.word + "' is not finite");
      bank.entries.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(kComponent, std::string("malformed word contour bank: ") + e.what());
  }
  return bank;
}

pitch::F0Contour replace_words(const pitch::F0Contour& contour, const features::Alignment& align,
                               const WordContourBank& bank, const std::string& speaker,
                               RngStream& rng) {
  contour.validate();
  std::vector<const BankEntry*> pool;
  for (const auto& e : bank.entries)
    if (e.speaker == speaker) pool.push_back(&e);
  if (pool.empty()) throw data_error(kComponent, "word contour bank has no entries for speaker " + speaker);
  const auto frames = word_voiced_frames(contour, align);
  pitch::F0Contour out = contour;
  for (const auto& f : frames) {
    const BankEntry& e = *pool[rng.uniform_index(pool.size())];
    if (f.empty()) continue;
    write_at(out, f, resample_linear(e.log2_hz, f.size()));
  }
  return out;
}

pitch::F0Contour repunctuate_heuristic(const pitch::F0Contour& contour,
                                       const features::Alignment& align, Punctuation target,
                                       const pitch::SpeakerStats& stats) {
  contour.validate();
  if (align.words.size() < 2)
    throw invalid_argument(kComponent, "repunctuation needs at least two words, got " +
                                           std::to_string(align.words.size()));
  const auto frames = word_voiced_frames(contour, align);
  std::vector<std::size_t> tail = frames[frames.size() - 2];
  tail.insert(tail.end(), frames.back().begin(), frames.back().end());
  const double span = (target == Punctuation::kQuestion ? 2.0 : -2.0) * stats.sigma;
  std::vector<double> ramp(tail.size());
  for (std::size_t k = 0; k < tail.size(); ++k)
    ramp[k] = stats.mu + (tail.size() == 1 ? 0.0 : span * static_cast<double>(k) / static_cast<double>(tail.size() - 1));
  pitch::F0Contour out = contour;
  write_at(out, tail, ramp);
  return out;
}

}  // namespace prosody::baselines
