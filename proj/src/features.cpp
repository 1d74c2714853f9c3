// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/features.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "prosody/error.hpp"

namespace prosody::features {

namespace {

using nlohmann::json;

const char* const kComponent = "features";
constexpr double kTimeTolerance = 1e-6;

constexpr std::array<std::string_view, kPhonemeCount> kInventory = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH", "EH", "ER", "EY", "F",
    "G",  "HH", "IH", "IY", "JH", "K",  "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",
    "S",  "SH", "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH", "sil", "unk"};

std::string fmt_time(double t) {
  std::ostringstream os;
  os << t;
  return os.str();
}

// Frame t belongs to [start, end) when its center time does.
bool center_in(double center, double start, double end) { return center >= start && center < end; }

}  // namespace

std::span<const std::string_view> phoneme_inventory() { return kInventory; }

std::optional<std::size_t> phoneme_index(std::string_view symbol) {
  std::string s(symbol);
  while (!s.empty() && std::isdigit(static_cast<unsigned char>(s.back()))) s.pop_back();
  if (s == "sil" || s == "SIL" || s == "sp" || s == "SP" || s.empty()) return kSilenceIndex;
  if (s == "unk" || s == "UNK" || s == "spn" || s == "SPN") return kUnknownIndex;
  std::string upper = s;
  for (char& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kSilenceIndex; ++i)
    if (kInventory[i] == upper) return i;
  return std::nullopt;
}

void validate_alignment(const Alignment& align, double audio_duration) {
  for (std::size_t i = 0; i < align.words.size(); ++i) {
    const auto& w = align.words[i];
    if (!(w.end >= w.start) || w.start < -kTimeTolerance)
      throw data_error(kComponent, "word " + std::to_string(i) + " has an invalid interval");
    if (i > 0 && w.start < align.words[i - 1].end - kTimeTolerance)
      throw data_error(kComponent, "overlapping words " + std::to_string(i - 1) + " and " +
                                       std::to_string(i));
    if (audio_duration >= 0.0 && w.end > audio_duration + kTimeTolerance)
      throw data_error(kComponent, "word " + std::to_string(i) + " ends at " + fmt_time(w.end) +
                                       " s, beyond audio duration " + fmt_time(audio_duration) +
                                       " s (range error)");
  }
  for (std::size_t i = 0; i < align.phones.size(); ++i) {
    const auto& p = align.phones[i];
    if (!(p.end >= p.start) || p.start < -kTimeTolerance)
      throw data_error(kComponent, "phone " + std::to_string(i) + " has an invalid interval");
    if (i > 0 && p.start < align.phones[i - 1].end - kTimeTolerance)
      throw data_error(kComponent, "overlapping phones " + std::to_string(i - 1) + " and " +
                                       std::to_string(i));
    if (audio_duration >= 0.0 && p.end > audio_duration + kTimeTolerance)
      throw data_error(kComponent, "phone " + std::to_string(i) + " ends beyond audio duration (range error)");
    if (p.word) {
      if (*p.word >= align.words.size())
        throw data_error(kComponent, "phone " + std::to_string(i) + " references missing word " +
                                         std::to_string(*p.word));
      const auto& w = align.words[*p.word];
      if (p.start < w.start - kTimeTolerance || p.end > w.end + kTimeTolerance)
        throw data_error(kComponent, "phone " + std::to_string(i) + " lies outside word " +
                                         std::to_string(*p.word));
    }
  }
}

Alignment parse_alignment(std::string_view json_text, double audio_duration) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw data_error(kComponent, std::string("alignment is not valid JSON: ") + e.what());
  }
  Alignment align;
  try {
    for (const auto& w : doc.at("words")) {
      Word word;
      word.text = w.at("text").get<std::string>();
      word.start = w.at("start").get<double>();
      word.end = w.at("end").get<double>();
      if (w.contains("punct")) {
        const auto& p = w.at("punct");
        word.punct.precedes_comma = p.value("comma", false);
        word.punct.precedes_period = p.value("period", false);
        word.punct.precedes_question = p.value("question", false);
        word.punct.in_quotes = p.value("quote", false);
      }
      align.words.push_back(std::move(word));
    }
    for (const auto& p : doc.at("phones")) {
      Phone phone;
      const auto sym = p.at("sym").get<std::string>();
      const auto idx = phoneme_index(sym);
      if (!idx) throw data_error(kComponent, "unknown phoneme symbol '" + sym + "'");
      phone.symbol = *idx;
      phone.start = p.at("start").get<double>();
      phone.end = p.at("end").get<double>();
      if (p.contains("word") && !p.at("word").is_null()) {
        const auto wi = p.at("word").get<long long>();
        if (wi < 0) throw data_error(kComponent, "negative word index on phone");
        phone.word = static_cast<std::size_t>(wi);
      }
      align.phones.push_back(phone);
    }
  } catch (const json::exception& e) {
    throw data_error(kComponent, std::string("alignment schema violation: ") + e.what());
  }
  validate_alignment(align, audio_duration);
  return align;
}

Alignment load_alignment(const std::filesystem::path& path, double audio_duration) {
  std::ifstream in(path);
  if (!in) throw data_error(kComponent, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_alignment(ss.str(), audio_duration);
}

std::string alignment_to_json(const Alignment& align) {
  json doc;
  doc["words"] = json::array();
  for (const auto& w : align.words)
    doc["words"].push_back({{"text", w.text},
                            {"start", w.start},
                            {"end", w.end},
                            {"punct",
                             {{"comma", w.punct.precedes_comma},
                              {"period", w.punct.precedes_period},
                              {"question", w.punct.precedes_question},
                              {"quote", w.punct.in_quotes}}}});
  doc["phones"] = json::array();
  for (const auto& p : align.phones) {
    json ph = {{"sym", std::string(kInventory[p.symbol])}, {"start", p.start}, {"end", p.end}};
    ph["word"] = p.word ? json(*p.word) : json(nullptr);
    doc["phones"].push_back(std::move(ph));
  }
  return doc.dump(1);
}

WordEmbeddingTable parse_embeddings(std::span<const std::uint8_t> bytes) {
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "EMBT", 4) != 0)
    throw data_error(kComponent, "embedding file: bad magic or truncated header");
  const std::size_t count = u32(4);
  const std::size_t dim = u32(8);
  if (dim == 0) throw data_error(kComponent, "embedding file: zero dimension");
  if (bytes.size() != 12 + 4 * count * dim)
    throw data_error(kComponent, "embedding file: size does not match header");
  WordEmbeddingTable t;
  t.dim = dim;
  t.vectors.resize(count * dim);
  for (std::size_t i = 0; i < count * dim; ++i) {
    const double v = std::bit_cast<float>(u32(12 + 4 * i));
    if (!std::isfinite(v)) throw data_error(kComponent, "embedding file: non-finite value");
    t.vectors[i] = v;
  }
  return t;
}

WordEmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(kComponent, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_embeddings(bytes);
}

std::vector<std::uint8_t> encode_embeddings(const WordEmbeddingTable& table) {
  std::vector<std::uint8_t> out;
  auto put = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  };
  out.insert(out.end(), {'E', 'M', 'B', 'T'});
  put(static_cast<std::uint32_t>(table.word_count()));
  put(static_cast<std::uint32_t>(table.dim));
  for (double v : table.vectors) put(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

FeatureLayout FeatureLayout::for_embedding(std::size_t dim) {
  FeatureLayout l;
  l.embedding_width = dim;
  l.vuv_offset = kPhonemeCount + dim;
  l.punct_offset = l.vuv_offset + 1;
  l.width = l.punct_offset + kPunctuationFlags;
  return l;
}

std::optional<std::size_t> word_at(const Alignment& align, double seconds) {
  for (std::size_t i = 0; i < align.words.size(); ++i)
    if (center_in(seconds, align.words[i].start, align.words[i].end)) return i;
  return std::nullopt;
}

std::pair<std::size_t, std::size_t> word_frames(const Word& w, const audio::FrameGrid& grid) {
  std::size_t first = grid.frame_count, last = 0;
  for (std::size_t t = 0; t < grid.frame_count; ++t) {
    if (center_in(grid.frame_center_seconds(t), w.start, w.end)) {
      first = std::min(first, t);
      last = t + 1;
    }
  }
  if (first >= last) return {0, 0};
  return {first, last};
}

FrameFeatures assemble_features(const Alignment& align, const WordEmbeddingTable& emb,
                                const std::vector<bool>& voiced, const audio::FrameGrid& grid) {
  if (voiced.size() != grid.frame_count)
    throw invalid_argument(kComponent, "voiced mask length " + std::to_string(voiced.size()) +
                                           " does not match frame count " +
                                           std::to_string(grid.frame_count));
  if (emb.word_count() < align.words.size())
    throw data_error(kComponent, "missing embedding for word " + std::to_string(emb.word_count()));

  FrameFeatures f;
  f.layout = FeatureLayout::for_embedding(emb.dim);
  f.matrix = Matrix(grid.frame_count, f.layout.width);
  std::size_t wi = 0, pi = 0;
  for (std::size_t t = 0; t < grid.frame_count; ++t) {
    const double c = grid.frame_center_seconds(t);
    // Intervals are sorted, so both cursors advance monotonically.
    while (wi < align.words.size() && align.words[wi].end <= c) ++wi;
    while (pi < align.phones.size() && align.phones[pi].end <= c) ++pi;
    auto row = f.matrix.row(t);
    std::size_t symbol = kSilenceIndex;
    const bool in_word = wi < align.words.size() && center_in(c, align.words[wi].start, align.words[wi].end);
    if (in_word) {
      if (pi < align.phones.size() && center_in(c, align.phones[pi].start, align.phones[pi].end))
        symbol = align.phones[pi].symbol;
      const auto v = emb.vector(wi);
      std::copy(v.begin(), v.end(), row.begin() + static_cast<long>(f.layout.embedding_offset));
      const auto& p = align.words[wi].punct;
      row[f.layout.punct_offset + 0] = p.precedes_comma ? 1.0 : 0.0;
      row[f.layout.punct_offset + 1] = p.precedes_period ? 1.0 : 0.0;
      row[f.layout.punct_offset + 2] = p.precedes_question ? 1.0 : 0.0;
      row[f.layout.punct_offset + 3] = p.in_quotes ? 1.0 : 0.0;
    }
    row[f.layout.phoneme_offset + symbol] = 1.0;
    row[f.layout.vuv_offset] = voiced[t] ? 1.0 : 0.0;
  }
  return f;
}

Matrix context_features(const FrameFeatures& feats, const codec::QuantizedF0& q) {
  if (q.size() != feats.frames())
    throw invalid_argument(kComponent, "context_features: length mismatch (" +
                                           std::to_string(feats.frames()) + " vs " +
                                           std::to_string(q.size()) + ")");
  const std::size_t width = feats.matrix.cols + codec::kClasses;
  Matrix out(feats.frames(), width);
  for (std::size_t t = 0; t < feats.frames(); ++t) {
    const auto src = feats.matrix.row(t);
    auto dst = out.row(t);
    std::copy(src.begin(), src.end(), dst.begin());
    const int b = q.bins[t];
    if (b < 0 || b >= codec::kClasses)
      throw invalid_argument(kComponent, "context_features: bin out of range");
    dst[feats.matrix.cols + static_cast<std::size_t>(b)] = 1.0;
  }
  return out;
}

}  // namespace prosody::features
