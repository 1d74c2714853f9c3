// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/audio.hpp"
#include "prosody/codec.hpp"
#include "prosody/corpus.hpp"
#include "prosody/matrix.hpp"
#include "prosody/pitch.hpp"

namespace prosody::evaluation {

struct RmseResult {
  double value = 0.0;          // log2-Hz
  std::size_t mutual_voiced = 0;
  double sum_squares = 0.0;
  bool warning = false;        // no mutually voiced frames
};

/// RMS of log2(hyp) - log2(ref) over frames voiced in both contours.
RmseResult rmse(const pitch::F0Contour& reference, const pitch::F0Contour& hypothesis);

struct NllResult {
  double value = 0.0;
  std::size_t frames = 0;
  bool warning = false;        // no voiced frames
};

/// Mean over voiced frames of -log softmax(post_logits)[reference bin].
NllResult nll(const Matrix& post_logits, const codec::QuantizedF0& reference,
              const std::vector<bool>& voiced);

struct VuvCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision() const { return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn); }
};

/// Voiced is the positive class; empty denominators give 1.0.
VuvCounts vuv_counts(const std::vector<bool>& reference, const std::vector<bool>& hypothesis);
std::pair<double, double> vuv_prf(const std::vector<bool>& reference, const std::vector<bool>& hypothesis);

/// Max voiced hz + 10.
double stimulus_cutoff(const pitch::F0Contour& contour);
audio::AudioBuffer make_lowpass_stimulus(const audio::AudioBuffer& audio, const pitch::F0Contour& contour);

enum class SystemKind { kIdentity, kMonotone, kSwap, kReplace, kModel };

struct SystemSpec {
  SystemKind kind = SystemKind::kIdentity;
  std::string label;
  std::filesystem::path checkpoint;  // kModel only
};

/// "identity", "monotone", "swap", "replace" or "model:<checkpoint>".
SystemSpec parse_system(const std::string& text);

struct UtteranceRow {
  std::string utterance;
  std::string system;
  std::size_t frames = 0;
  std::size_t voiced_frames = 0;
  RmseResult rmse;
  std::optional<NllResult> nll;
  VuvCounts vuv;
  std::string warning;
};

struct SystemAggregate {
  std::string system;
  std::size_t utterances = 0;
  std::size_t frames = 0;
  std::size_t voiced_frames = 0;
  std::size_t mutual_voiced = 0;
  double rmse_log2 = 0.0;                 // pooled over mutually voiced frames
  std::optional<double> nll;              // frame-weighted over voiced frames
  std::size_t nll_frames = 0;
  VuvCounts vuv;                          // pooled counts
};

struct EvalReport {
  std::vector<UtteranceRow> rows;         // utterance-major, systems in request order
  std::vector<SystemAggregate> systems;
  std::vector<corpus::Exclusion> exclusions;
  nlohmann::json provenance;

  bool partial() const { return !exclusions.empty(); }
  std::string csv() const;
  nlohmann::json aggregate_json() const;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

/// Scores every system on every loadable utterance of the manifest.
EvalReport eval_run(const corpus::Manifest& manifest, const std::vector<SystemSpec>& systems,
                    const EvalOptions& options = {});

/// 64-bit FNV-1a of a string.
std::uint64_t fnv1a(std::string_view text);

}  // namespace prosody::evaluation
