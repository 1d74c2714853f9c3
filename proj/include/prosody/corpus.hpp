// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prosody/audio.hpp"
#include "prosody/codec.hpp"
#include "prosody/features.hpp"
#include "prosody/model.hpp"
#include "prosody/pitch.hpp"

namespace prosody::corpus {

/// One utterance of a manifest. Paths are resolved against the manifest's
/// directory; `preceding` and `following` name other utterance ids.
struct ManifestEntry {
  std::string id;
  std::filesystem::path audio;
  std::filesystem::path alignment;
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> reference;  // contour JSON
  std::optional<std::string> preceding;
  std::optional<std::string> following;
};

struct Manifest {
  std::string speaker;
  std::vector<ManifestEntry> entries;
};

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

struct Utterance {
  std::string id;
  double duration = 0.0;
  features::Alignment alignment;
  pitch::F0Contour contour;          // reference contour
  features::FrameFeatures features;
  codec::QuantizedF0 bins;           // under the corpus grid
  std::optional<std::size_t> preceding;
  std::optional<std::size_t> following;
};

struct Exclusion {
  std::string id;
  std::string reason;
};

struct Corpus {
  std::string speaker;
  std::vector<Utterance> utterances;
  std::vector<Exclusion> exclusions;
  pitch::SpeakerStats stats;
  codec::QuantGrid grid;

  /// Model inputs for utterance i with teacher bins and neighbours as context.
  model::UtteranceInputs inputs(std::size_t i, bool with_context) const;
};

/// Loads and analyzes every entry (in parallel). With `tolerate_missing`,
/// unreadable entries are recorded as exclusions instead of throwing.
Corpus load_corpus(const Manifest& manifest, bool tolerate_missing,
                   const pitch::AnalysisConfig& analysis = {});

}  // namespace prosody::corpus
