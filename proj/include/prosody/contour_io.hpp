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
#include "prosody/model.hpp"
#include "prosody/pitch.hpp"

namespace prosody::io {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);
nlohmann::json parse_json(std::string_view text, const std::string& what);

// {"hop_seconds": 0.01, "sample_rate": 16000, "hz": [...], "voiced": [...]}
nlohmann::json contour_to_json(const pitch::F0Contour& contour, int sample_rate = audio::kCanonicalRate);
pitch::F0Contour contour_from_json(const nlohmann::json& j);

// {"grid": {"mu": .., "sigma": ..}, "bins": [...]}
nlohmann::json quantized_to_json(const codec::QuantizedF0& q, const codec::QuantGrid& grid);
std::pair<codec::QuantizedF0, codec::QuantGrid> quantized_from_json(const nlohmann::json& j);

nlohmann::json stats_to_json(const pitch::SpeakerStats& stats);
pitch::SpeakerStats stats_from_json(const nlohmann::json& j);

/// One user-specified stretch of contour; hz has end_frame - start_frame
/// entries, with 0 (or null) marking an unvoiced frame.
struct ConstraintSegment {
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  std::vector<double> hz;
};

struct FrameRange {
  std::size_t start = 0;
  std::size_t end = 0;
};

struct GenerateRequest {
  std::vector<ConstraintSegment> constraints;
  std::vector<FrameRange> keep_regions;
  std::optional<model::Direction> direction;
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

GenerateRequest generate_request_from_json(const nlohmann::json& j);
nlohmann::json generate_request_to_json(const GenerateRequest& req);

/// Converts a request into a constraint track over `frames` frames.
/// keep_regions take their values from `working`; explicit constraints win
/// where both apply. Ranges must lie in [0, frames) and explicit segments
/// must not overlap each other. Constrained frames follow `voiced`: unvoiced
/// frames become bin 0 and voiced frames need a positive hz.
model::ConstraintTrack resolve_constraints(const GenerateRequest& req, const pitch::F0Contour& working,
                                           const codec::QuantGrid& grid,
                                           const std::vector<bool>& voiced);

}  // namespace prosody::io
