// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/corpus.hpp"

#include <exception>

#include "prosody/contour_io.hpp"
#include "prosody/error.hpp"

namespace prosody::corpus {

namespace {

const char* const kComponent = "corpus";

}  // namespace

Manifest parse_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
  const auto j = io::parse_json(json_text, "manifest");
  if (!j.is_object() || !j.contains("utterances") || !j.at("utterances").is_array())
    throw data_error(kComponent, "manifest needs an 'utterances' array");
  Manifest m;
  m.speaker = j.value("speaker", std::string("speaker"));
  auto path = [&](const nlohmann::json& u, const char* key) -> std::filesystem::path {
    if (!u.contains(key) || !u.at(key).is_string())
      throw data_error(kComponent, "manifest entry lacks '" + std::string(key) + "'");
    std::filesystem::path p = u.at(key).get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  for (const auto& u : j.at("utterances")) {
    ManifestEntry e;
    if (!u.contains("id") || !u.at("id").is_string()) throw data_error(kComponent, "manifest entry lacks 'id'");
    e.id = u.at("id").get<std::string>();
    e.audio = path(u, "audio");
    e.alignment = path(u, "alignment");
    e.embeddings = path(u, "embeddings");
    if (u.contains("reference")) e.reference = path(u, "reference");
    if (u.contains("preceding")) e.preceding = u.at("preceding").get<std::string>();
    if (u.contains("following")) e.following = u.at("following").get<std::string>();
    for (const auto& prev : m.entries)
      if (prev.id == e.id) throw data_error(kComponent, "duplicate utterance id " + e.id);
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(io::read_text(path), path.parent_path());
}

model::UtteranceInputs Corpus::inputs(std::size_t i, bool with_context) const {
  const Utterance& u = utterances.at(i);
  model::UtteranceInputs in;
  in.features = u.features.matrix;
  in.teacher = u.bins.bins;
  in.voiced = u.contour.voiced;
  if (with_context) {
    if (u.preceding) {
      const Utterance& p = utterances[*u.preceding];
      in.context.preceding = features::context_features(p.features, p.bins);
    }
    if (u.following) {
      const Utterance& f = utterances[*u.following];
      in.context.following = features::context_features(f.features, f.bins);
    }
  }
  return in;
}

Corpus load_corpus(const Manifest& manifest, bool tolerate_missing, const pitch::AnalysisConfig& analysis) {
  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<Utterance>> loaded(n);
  std::vector<std::string> errors(n);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = manifest.entries[i];
    try {
      Utterance u;
      u.id = e.id;
      const auto audio = audio::load_audio(e.audio);
      u.duration = audio.duration();
      u.alignment = features::load_alignment(e.alignment, u.duration);
      const auto emb = features::load_embeddings(e.embeddings);
      const auto grid = audio::FrameGrid::for_audio(audio);
      if (e.reference) {
        u.contour = io::contour_from_json(io::parse_json(io::read_text(*e.reference), "reference contour"));
        if (u.contour.size() != grid.frame_count)
          throw data_error(kComponent, e.id + ": reference has " + std::to_string(u.contour.size()) +
                                           " frames, audio has " + std::to_string(grid.frame_count));
      } else {
        u.contour = pitch::analyze(audio, analysis);
      }
      u.features = features::assemble_features(u.alignment, emb, u.contour.voiced, grid);
      loaded[i] = std::move(u);
    } catch (const std::exception& ex) {
      errors[i] = ex.what();
    }
  }

  Corpus c;
  c.speaker = manifest.speaker;
  std::vector<std::size_t> index_of(n, SIZE_MAX);
  for (std::size_t i = 0; i < n; ++i) {
    if (!loaded[i]) {
      if (!tolerate_missing) throw data_error(kComponent, manifest.entries[i].id + ": " + errors[i]);
      c.exclusions.push_back({manifest.entries[i].id, errors[i]});
      continue;
    }
    index_of[i] = c.utterances.size();
    c.utterances.push_back(std::move(*loaded[i]));
  }
  if (c.utterances.empty()) throw data_error(kComponent, "no usable utterances in manifest");

  auto find = [&](const std::optional<std::string>& id) -> std::optional<std::size_t> {
    if (!id) return std::nullopt;
    for (std::size_t i = 0; i < n; ++i)
      if (manifest.entries[i].id == *id && index_of[i] != SIZE_MAX) return index_of[i];
    return std::nullopt;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (index_of[i] == SIZE_MAX) continue;
    auto& u = c.utterances[index_of[i]];
    u.preceding = find(manifest.entries[i].preceding);
    u.following = find(manifest.entries[i].following);
  }

  std::vector<pitch::F0Contour> contours;
  for (const auto& u : c.utterances) contours.push_back(u.contour);
  c.stats = pitch::speaker_stats(contours);
  c.grid = codec::build_grid(c.stats);
  for (auto& u : c.utterances) u.bins = codec::quantize(u.contour, c.grid);
  return c;
}

}  // namespace prosody::corpus
