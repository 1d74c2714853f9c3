// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "prosody/error.hpp"
#include "prosody/features.hpp"
#include "support/synth.hpp"

using namespace prosody;
using namespace prosody::features;

namespace {

const char* kTwoWords = R"({
  "words": [
    {"text": "hello", "start": 0.10, "end": 0.40, "punct": {"comma": true, "period": false, "question": false, "quote": false}},
    {"text": "there", "start": 0.45, "end": 0.80, "punct": {"comma": false, "period": true, "question": false, "quote": true}}
  ],
  "phones": [
    {"sym": "HH", "start": 0.10, "end": 0.20, "word": 0},
    {"sym": "AH0", "start": 0.20, "end": 0.40, "word": 0},
    {"sym": "sp", "start": 0.40, "end": 0.45, "word": null},
    {"sym": "DH", "start": 0.45, "end": 0.60, "word": 1},
    {"sym": "EH1", "start": 0.60, "end": 0.80, "word": 1}
  ]
})";

WordEmbeddingTable table(std::size_t words, std::size_t dim) {
  WordEmbeddingTable t;
  t.dim = dim;
  for (std::size_t i = 0; i < words * dim; ++i) t.vectors.push_back(0.1 * static_cast<double>(i + 1));
  return t;
}

}  // namespace

TEST_CASE("alignment parsing and validation") {
  const auto a = parse_alignment(kTwoWords, 1.0);
  CHECK(a.words.size() == 2);
  CHECK(a.phones.size() == 5);
  CHECK(a.phones[1].symbol == *phoneme_index("AH"));
  CHECK(a.phones[2].symbol == kSilenceIndex);
  CHECK(a.words[0].punct.precedes_comma);
  CHECK(a.words[1].punct.in_quotes);

  std::string overlap = kTwoWords;
  overlap.replace(overlap.find("\"start\": 0.20"), 13, "\"start\": 0.15");
  CHECK_THROWS_AS(parse_alignment(overlap, 1.0), Error);
  CHECK_THROWS_AS(parse_alignment(kTwoWords, 0.5), Error);
  std::string unknown = kTwoWords;
  unknown.replace(unknown.find("\"HH\""), 4, "\"QQ\"");
  CHECK_THROWS_AS(parse_alignment(unknown, 1.0), Error);
  std::string outside = kTwoWords;
  outside.replace(outside.find("\"end\": 0.60"), 11, "\"end\": 0.90");
  CHECK_THROWS_AS(parse_alignment(outside, 1.0), Error);
  CHECK(parse_alignment(alignment_to_json(a), 1.0).words.size() == 2);
}

TEST_CASE("phoneme inventory is closed at 41 symbols") {
  CHECK(phoneme_inventory().size() == kPhonemeCount);
  CHECK(phoneme_index("sil") == kSilenceIndex);
  CHECK(phoneme_index("spn") == kUnknownIndex);
  CHECK_FALSE(phoneme_index("XYZ").has_value());
}

TEST_CASE("embedding file round trip and errors") {
  const auto t = table(3, 4);
  const auto back = parse_embeddings(encode_embeddings(t));
  CHECK(back.dim == 4);
  CHECK(back.word_count() == 3);
  for (std::size_t i = 0; i < t.vectors.size(); ++i) CHECK(back.vectors[i] == doctest::Approx(t.vectors[i]).epsilon(1e-6));
  auto bytes = encode_embeddings(t);
  bytes.pop_back();
  CHECK_THROWS_AS(parse_embeddings(bytes), Error);
}

TEST_CASE("assemble_features: layout, out-of-word frames and punctuation") {
  const auto a = parse_alignment(kTwoWords, 1.0);
  const auto emb = table(2, 4);
  const auto grid = audio::FrameGrid::for_frames(100);
  std::vector<bool> voiced(100, false);
  for (std::size_t t = 20; t < 70; ++t) voiced[t] = true;
  const auto f = assemble_features(a, emb, voiced, grid);
  const auto& L = f.layout;
  CHECK(f.matrix.rows == 100);
  CHECK(f.matrix.cols == kPhonemeCount + 4 + 1 + kPunctuationFlags);
  for (std::size_t t = 0; t < 100; ++t) {
    double s = 0.0;
    for (std::size_t p = 0; p < kPhonemeCount; ++p) s += f.matrix(t, L.phoneme_offset + p);
    CHECK(s == 1.0);
    CHECK(f.matrix(t, L.vuv_offset) == (voiced[t] ? 1.0 : 0.0));
  }
  // Frame 0 (centre 5 ms) precedes the first word.
  CHECK(f.matrix(0, L.phoneme_offset + kSilenceIndex) == 1.0);
  for (std::size_t d = 0; d < 4; ++d) CHECK(f.matrix(0, L.embedding_offset + d) == 0.0);
  // Frame 15 is inside "hello", which precedes a comma.
  CHECK(f.matrix(15, L.punct_offset + 0) == 1.0);
  CHECK(f.matrix(15, L.embedding_offset + 1) == doctest::Approx(0.2));
  CHECK(f.matrix(50, L.punct_offset + 1) == 1.0);
  CHECK(f.matrix(50, L.punct_offset + 3) == 1.0);
  CHECK(f.matrix(50, L.embedding_offset) == doctest::Approx(0.5));
  CHECK(f.matrix(95, L.punct_offset + 1) == 0.0);

  // Only the punctuation slice of that word's frames changes.
  auto b = a;
  b.words[0].punct.precedes_question = true;
  const auto g = assemble_features(b, emb, voiced, grid);
  for (std::size_t t = 0; t < 100; ++t)
    for (std::size_t c = 0; c < f.matrix.cols; ++c) {
      const bool differs = f.matrix(t, c) != g.matrix(t, c);
      const bool allowed = c == L.punct_offset + 2 && t >= 10 && t < 40;
      if (!allowed) CHECK_FALSE(differs);
      else CHECK(differs);
    }
  CHECK(assemble_features(a, emb, voiced, grid).matrix.data == f.matrix.data);
  CHECK_THROWS_AS(assemble_features(a, table(1, 4), voiced, grid), Error);
  CHECK_THROWS_AS(assemble_features(a, emb, std::vector<bool>(99), grid), Error);
}

TEST_CASE("context_features append an invertible one-hot") {
  const auto a = parse_alignment(kTwoWords, 1.0);
  const auto f = assemble_features(a, table(2, 4), std::vector<bool>(100, true), audio::FrameGrid::for_frames(100));
  codec::QuantizedF0 q;
  for (int t = 0; t < 100; ++t) q.bins.push_back(t % 128);
  const auto m = context_features(f, q);
  CHECK(m.cols == f.matrix.cols + 128);
  for (std::size_t t = 0; t < 100; ++t) {
    const auto row = m.row(t).subspan(f.matrix.cols);
    const auto arg = std::max_element(row.begin(), row.end()) - row.begin();
    CHECK(arg == q.bins[t]);
    CHECK(std::accumulate(row.begin(), row.end(), 0.0) == 1.0);
  }
  q.bins.pop_back();
  CHECK_THROWS_AS(context_features(f, q), Error);
}
