// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/contour_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "prosody/error.hpp"

namespace prosody::io {

namespace {

const char* const kComponent = "io";

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key))
    throw data_error(kComponent, what + " lacks field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw data_error(kComponent, what + " field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kNotFound, kComponent, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kNotFound, kComponent, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error(kComponent, "cannot write " + tmp.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw data_error(kComponent, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw data_error(kComponent, "cannot rename onto " + path.string() + ": " + ec.message());
}

void write_atomic(const std::filesystem::path& path, std::string_view text) {
  write_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json parse_json(std::string_view text, const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw data_error(kComponent, what + " is not valid JSON (byte " + std::to_string(e.byte) + ")");
  }
}

nlohmann::json contour_to_json(const pitch::F0Contour& contour, int sample_rate) {
  nlohmann::json voiced = nlohmann::json::array();
  for (bool v : contour.voiced) voiced.push_back(v);
  return {{"hop_seconds", audio::kHopSeconds},
          {"sample_rate", sample_rate},
          {"hz", contour.hz},
          {"voiced", voiced}};
}

pitch::F0Contour contour_from_json(const nlohmann::json& j) {
  pitch::F0Contour c;
  c.hz = field<std::vector<double>>(j, "hz", "contour");
  c.voiced = field<std::vector<bool>>(j, "voiced", "contour");
  if (j.contains("hop_seconds") && std::abs(j.at("hop_seconds").get<double>() - audio::kHopSeconds) > 1e-9)
    throw data_error(kComponent, "contour hop must be 0.01 s");
  try {
    c.validate();
  } catch (const Error& e) {
    throw data_error(kComponent, std::string("invalid contour: ") + e.what());
  }
  return c;
}

nlohmann::json quantized_to_json(const codec::QuantizedF0& q, const codec::QuantGrid& grid) {
  return {{"grid", {{"mu", grid.mu}, {"sigma", grid.sigma}}}, {"bins", q.bins}};
}

std::pair<codec::QuantizedF0, codec::QuantGrid> quantized_from_json(const nlohmann::json& j) {
  const auto g = field<nlohmann::json>(j, "grid", "quantized contour");
  codec::QuantGrid grid{field<double>(g, "mu", "grid"), field<double>(g, "sigma", "grid")};
  if (!(grid.sigma > 0.0)) throw data_error(kComponent, "grid sigma must be positive");
  codec::QuantizedF0 q;
  q.bins = field<std::vector<int>>(j, "bins", "quantized contour");
  for (int b : q.bins)
    if (b < 0 || b >= codec::kClasses) throw data_error(kComponent, "bin " + std::to_string(b) + " out of range");
  return {std::move(q), grid};
}

nlohmann::json stats_to_json(const pitch::SpeakerStats& stats) {
  return {{"mu", stats.mu}, {"sigma", stats.sigma}, {"frame_count", stats.frame_count}};
}

pitch::SpeakerStats stats_from_json(const nlohmann::json& j) {
  pitch::SpeakerStats s;
  s.mu = field<double>(j, "mu", "speaker stats");
  s.sigma = field<double>(j, "sigma", "speaker stats");
  if (j.contains("frame_count")) s.frame_count = j.at("frame_count").get<std::size_t>();
  if (!(s.sigma > 0.0) || !std::isfinite(s.mu)) throw data_error(kComponent, "speaker stats out of range");
  return s;
}

GenerateRequest generate_request_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw data_error(kComponent, "generate request must be a JSON object");
  static const char* const known[] = {"constraints", "keep_regions", "direction", "seed", "temperature"};
  for (const auto& [key, v] : j.items())
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw data_error(kComponent, "unknown request key '" + key + "'");
  GenerateRequest req;
  try {
    for (const auto& c : j.value("constraints", nlohmann::json::array())) {
      ConstraintSegment seg;
      seg.start_frame = field<std::size_t>(c, "start_frame", "constraint");
      seg.end_frame = field<std::size_t>(c, "end_frame", "constraint");
      for (const auto& v : field<nlohmann::json>(c, "hz", "constraint"))
        seg.hz.push_back(v.is_null() ? 0.0 : v.get<double>());
      req.constraints.push_back(std::move(seg));
    }
    for (const auto& r : j.value("keep_regions", nlohmann::json::array())) {
      if (r.is_array() && r.size() == 2) {
        req.keep_regions.push_back({r[0].get<std::size_t>(), r[1].get<std::size_t>()});
      } else {
        req.keep_regions.push_back(
            {field<std::size_t>(r, "start_frame", "keep region"), field<std::size_t>(r, "end_frame", "keep region")});
      }
    }
    if (j.contains("direction")) {
      const auto d = j.at("direction").get<std::string>();
      if (d == "forward") req.direction = model::Direction::kForward;
      else if (d == "reverse") req.direction = model::Direction::kReverse;
      else throw data_error(kComponent, "direction must be forward or reverse");
    }
    req.seed = j.value("seed", std::uint64_t{0});
    req.temperature = j.value("temperature", 1.0);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(kComponent, std::string("malformed generate request: ") + e.what());
  }
  if (!(req.temperature > 0.0)) throw data_error(kComponent, "temperature must be positive");
  return req;
}

nlohmann::json generate_request_to_json(const GenerateRequest& req) {
  nlohmann::json j;
  j["constraints"] = nlohmann::json::array();
  for (const auto& c : req.constraints)
    j["constraints"].push_back({{"start_frame", c.start_frame}, {"end_frame", c.end_frame}, {"hz", c.hz}});
  j["keep_regions"] = nlohmann::json::array();
  for (const auto& r : req.keep_regions) j["keep_regions"].push_back({{"start_frame", r.start}, {"end_frame", r.end}});
  if (req.direction) j["direction"] = *req.direction == model::Direction::kForward ? "forward" : "reverse";
  j["seed"] = req.seed;
  j["temperature"] = req.temperature;
  return j;
}

model::ConstraintTrack resolve_constraints(const GenerateRequest& req, const pitch::F0Contour& working,
                                           const codec::QuantGrid& grid,
                                           const std::vector<bool>& voiced) {
  const std::size_t frames = voiced.size();
  auto in_range = [&](std::size_t a, std::size_t b, const std::string& what) {
    if (a >= b || b > frames)
      throw data_error(kComponent, what + " [" + std::to_string(a) + ", " + std::to_string(b) +
                                       ") is not a nonempty range within [0, " + std::to_string(frames) + ")");
  };
  model::ConstraintTrack track = model::ConstraintTrack::none(frames);
  for (const auto& r : req.keep_regions) {
    in_range(r.start, r.end, "keep region");
    if (working.size() != frames) throw data_error(kComponent, "working contour length mismatch");
    for (std::size_t t = r.start; t < r.end; ++t) {
      track.mask[t] = true;
      track.bins[t] = voiced[t] ? codec::quantize_hz(working.hz[t], grid) : codec::kUnvoicedBin;
    }
  }
  std::vector<bool> explicit_mask(frames, false);
  for (const auto& c : req.constraints) {
    in_range(c.start_frame, c.end_frame, "constraint");
    if (c.hz.size() != c.end_frame - c.start_frame)
      throw data_error(kComponent, "constraint [" + std::to_string(c.start_frame) + ", " +
                                       std::to_string(c.end_frame) + ") needs " +
                                       std::to_string(c.end_frame - c.start_frame) + " hz values, got " +
                                       std::to_string(c.hz.size()));
    for (std::size_t t = c.start_frame; t < c.end_frame; ++t) {
      if (explicit_mask[t]) throw data_error(kComponent, "constraints overlap at frame " + std::to_string(t));
      explicit_mask[t] = true;
      const double hz = c.hz[t - c.start_frame];
      if (!std::isfinite(hz) || hz < 0.0) throw data_error(kComponent, "constraint hz must be finite and >= 0");
      if (voiced[t] && !(hz > 0.0))
        throw data_error(kComponent, "constraint marks voiced frame " + std::to_string(t) + " as unvoiced");
      track.mask[t] = true;
      track.bins[t] = voiced[t] ? codec::quantize_hz(hz, grid) : codec::kUnvoicedBin;
    }
  }
  return track;
}

}  // namespace prosody::io
