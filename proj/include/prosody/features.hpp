// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosody/audio.hpp"
#include "prosody/codec.hpp"
#include "prosody/matrix.hpp"

namespace prosody::features {

/// 39 ARPAbet phonemes, then "sil" and "unk". Stress digits are stripped on
/// load; "sp" maps to "sil" and "spn" to "unk".
inline constexpr std::size_t kPhonemeCount = 41;
inline constexpr std::size_t kSilenceIndex = 39;
inline constexpr std::size_t kUnknownIndex = 40;
inline constexpr std::size_t kPunctuationFlags = 4;

std::span<const std::string_view> phoneme_inventory();
/// Index into the inventory, or nullopt for symbols outside it.
std::optional<std::size_t> phoneme_index(std::string_view symbol);

struct Punctuation {
  bool precedes_comma = false;
  bool precedes_period = false;
  bool precedes_question = false;
  bool in_quotes = false;
};

struct Word {
  std::string text;
  double start = 0.0;
  double end = 0.0;
  Punctuation punct;
};

struct Phone {
  std::size_t symbol = kSilenceIndex;
  double start = 0.0;
  double end = 0.0;
  std::optional<std::size_t> word;
};

struct Alignment {
  std::vector<Word> words;
  std::vector<Phone> phones;
};

/// Parses and validates the alignment JSON. A negative duration skips the
/// end-of-audio check.
Alignment parse_alignment(std::string_view json_text, double audio_duration = -1.0);
Alignment load_alignment(const std::filesystem::path& path, double audio_duration = -1.0);
void validate_alignment(const Alignment& align, double audio_duration);
std::string alignment_to_json(const Alignment& align);

struct WordEmbeddingTable {
  std::size_t dim = 32;
  std::vector<double> vectors;  // word_count x dim

  std::size_t word_count() const { return dim == 0 ? 0 : vectors.size() / dim; }
  std::span<const double> vector(std::size_t word) const {
    return {vectors.data() + word * dim, dim};
  }
};

/// Little-endian "EMBT" layout: magic, u32 word_count, u32 dim, row-major f32.
WordEmbeddingTable parse_embeddings(std::span<const std::uint8_t> bytes);
WordEmbeddingTable load_embeddings(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_embeddings(const WordEmbeddingTable& table);

struct FeatureLayout {
  std::size_t phoneme_offset = 0;
  std::size_t embedding_offset = kPhonemeCount;
  std::size_t embedding_width = 32;
  std::size_t vuv_offset = kPhonemeCount + 32;
  std::size_t punct_offset = kPhonemeCount + 33;
  std::size_t width = kPhonemeCount + 32 + 1 + kPunctuationFlags;

  static FeatureLayout for_embedding(std::size_t dim);
};

struct FrameFeatures {
  Matrix matrix;  // T x F
  FeatureLayout layout;

  std::size_t frames() const { return matrix.rows; }
};

FrameFeatures assemble_features(const Alignment& align, const WordEmbeddingTable& emb,
                                const std::vector<bool>& voiced, const audio::FrameGrid& grid);

/// Feature rows with the one-hot quantized F0 appended (width F + 128).
Matrix context_features(const FrameFeatures& feats, const codec::QuantizedF0& q);

/// Index of the word whose interval contains time t, if any.
std::optional<std::size_t> word_at(const Alignment& align, double seconds);
/// Frames whose center lies in word w's interval, as [first, last).
std::pair<std::size_t, std::size_t> word_frames(const Word& w, const audio::FrameGrid& grid);

}  // namespace prosody::features
