// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "prosody/audio.hpp"
#include "prosody/error.hpp"

namespace prosody::audio {

namespace {

const char* const kComponent = "audio_io";

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FormatChunk& fmt) {
  switch (fmt.bits) {
    case 8:
      return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16:
      return static_cast<double>(static_cast<std::int16_t>(read_u16(p))) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<double>(v) / 8388608.0;
    }
    case 32: {
      float f;
      std::uint32_t bits = read_u32(p);
      std::memcpy(&f, &bits, sizeof f);
      return static_cast<double>(f);
    }
    default:
      return 0.0;
  }
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

}  // namespace

AudioBuffer load_audio(std::span<const std::uint8_t> bytes, int target_rate) {
  if (target_rate <= 0) throw invalid_argument(kComponent, "target rate must be positive");
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw data_error(kComponent, "malformed header: not a RIFF/WAVE stream");

  FormatChunk fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) throw data_error(kComponent, "malformed header: short fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      fmt.format = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.bits = read_u16(f + 14);
      if (fmt.format == 0xFFFE && size >= 40 && available >= 26) fmt.format = read_u16(f + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Tolerate truncated streams by clipping to what is present.
      data_size = std::min<std::size_t>(size, available);
      break;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw data_error(kComponent, "malformed header: missing fmt chunk");
  if (data == nullptr) throw data_error(kComponent, "malformed header: missing data chunk");

  const bool pcm = fmt.format == 1 && (fmt.bits == 8 || fmt.bits == 16 || fmt.bits == 24);
  const bool flt = fmt.format == 3 && fmt.bits == 32;
  if (!pcm && !flt)
    throw data_error(kComponent, "unsupported codec: format " + std::to_string(fmt.format) +
                                     " with " + std::to_string(fmt.bits) + " bits");
  if (fmt.channels < 1 || fmt.channels > 2)
    throw data_error(kComponent, "unsupported channel count " + std::to_string(fmt.channels));
  if (fmt.sample_rate == 0) throw data_error(kComponent, "malformed header: zero sample rate");

  const std::size_t frame_bytes = static_cast<std::size_t>(fmt.bits / 8) * fmt.channels;
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw data_error(kComponent, "zero-length payload");

  std::vector<double> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c)
      acc += decode_sample(data + i * frame_bytes + c * (fmt.bits / 8), fmt);
    double v = acc / fmt.channels;
    if (!std::isfinite(v)) throw data_error(kComponent, "non-finite sample in payload");
    mono[i] = std::clamp(v, -1.0, 1.0);
  }

  AudioBuffer out;
  out.sample_rate = target_rate;
  if (static_cast<int>(fmt.sample_rate) == target_rate) {
    out.samples = std::move(mono);
  } else {
    out.samples = resample(mono, static_cast<int>(fmt.sample_rate), target_rate);
    for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  }
  return out;
}

AudioBuffer load_audio(const std::filesystem::path& path, int target_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(kComponent, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_audio(bytes, target_rate);
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double x : audio.samples) {
    // Scale 32768 matches the reader, so loaded samples re-encode bit-exactly.
    const long v = std::clamp(std::lround(x * 32768.0), -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error(kComponent, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<double> resample(std::span<const double> input, int from_rate, int to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw invalid_argument(kComponent, "rates must be positive");
  if (from_rate == to_rate) return {input.begin(), input.end()};

  constexpr double kZeroCrossings = 24.0;
  constexpr double kBeta = 8.6;
  const double ratio = static_cast<double>(to_rate) / from_rate;
  const double fc = 0.97 * std::min(1.0, ratio);  // relative to the source Nyquist
  const double half_width = kZeroCrossings / fc;
  const double norm = bessel_i0(kBeta);

  const std::size_t out_len = static_cast<std::size_t>(
      static_cast<unsigned long long>(input.size()) * static_cast<unsigned long long>(to_rate) /
      static_cast<unsigned long long>(from_rate));
  std::vector<double> out(out_len);
  const long n_out = static_cast<long>(out_len);
  const long n_in = static_cast<long>(input.size());
#pragma omp parallel for schedule(static)
  for (long n = 0; n < n_out; ++n) {
    const double t = static_cast<double>(n) / ratio;
    const long k0 = std::max(0L, static_cast<long>(std::ceil(t - half_width)));
    const long k1 = std::min(n_in - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long k = k0; k <= k1; ++k) {
      const double u = t - static_cast<double>(k);
      const double r = u / half_width;
      const double w = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
      const double arg = fc * u;
      const double sinc = arg == 0.0 ? 1.0 : std::sin(M_PI * arg) / (M_PI * arg);
      acc += input[static_cast<std::size_t>(k)] * fc * sinc * w;
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace prosody::audio
