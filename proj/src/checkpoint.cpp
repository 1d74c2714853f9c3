// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <map>

#include "prosody/error.hpp"
#include "prosody/nn.hpp"

namespace prosody::nn {

namespace {

const char* const kComponent = "checkpoint";
constexpr char kMagic[4] = {'P', 'C', 'K', 'P'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    u64(v);
  }
  void entry(const std::string& name, const std::vector<std::size_t>& shape,
             const std::vector<double>& data) {
    u32(static_cast<std::uint32_t>(name.size()));
    raw(name.data(), name.size());
    u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) u32(static_cast<std::uint32_t>(d));
    for (double v : data) f64(v);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
  void need(std::size_t n) {
    if (pos + n > bytes.size())
      throw data_error(kComponent, "truncated checkpoint at byte " + std::to_string(pos));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes[pos++]} << (8 * i);
    return v;
  }
  double f64() {
    const std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
  struct Entry {
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };
  std::pair<std::string, Entry> entry() {
    const std::uint32_t len = u32();
    std::string name = str(len);
    Entry e;
    const std::uint32_t rank = u32();
    if (rank > 8) throw data_error(kComponent, "implausible rank for " + name);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      e.shape.push_back(u32());
      n *= e.shape.back();
    }
    need(n * 8);
    e.data.resize(n);
    for (auto& v : e.data) v = f64();
    return {std::move(name), std::move(e)};
  }

  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_parameters(const ParameterSet& params) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    w.entry(params.name(i), params.value(i).shape, params.value(i).data);
  w.u32(static_cast<std::uint32_t>(2 * params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.entry(params.name(i) + "/adam_m", params.value(i).shape, params.adam(i).m);
    w.entry(params.name(i) + "/adam_v", params.value(i).shape, params.adam(i).v);
  }
  w.u64(params.step);
  return std::move(w.out);
}

void decode_parameters(std::span<const std::uint8_t> bytes, ParameterSet& params,
                       std::size_t* consumed) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw data_error(kComponent, "bad magic");
  r.pos = 4;
  std::map<std::string, Reader::Entry> values, moments;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) values.insert(r.entry());
  const std::uint32_t adam_count = r.u32();
  for (std::uint32_t i = 0; i < adam_count; ++i) moments.insert(r.entry());
  const std::uint64_t step = r.u64();

  if (values.size() != params.size())
    throw data_error(kComponent, "checkpoint has " + std::to_string(values.size()) +
                                     " parameters, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    auto it = values.find(name);
    if (it == values.end()) throw data_error(kComponent, "missing parameter " + name);
    auto& p = params.value(i);
    if (it->second.shape != p.shape) throw data_error(kComponent, "shape mismatch for " + name);
    p.data = it->second.data;
    auto m = moments.find(name + "/adam_m");
    auto v = moments.find(name + "/adam_v");
    if (m != moments.end() && v != moments.end() && m->second.data.size() == p.size() &&
        v->second.data.size() == p.size()) {
      params.adam(i).m = m->second.data;
      params.adam(i).v = v->second.data;
    } else {
      std::fill(params.adam(i).m.begin(), params.adam(i).m.end(), 0.0);
      std::fill(params.adam(i).v.begin(), params.adam(i).v.end(), 0.0);
    }
  }
  params.step = step;
  if (consumed) *consumed = r.pos;
}

}  // namespace prosody::nn
