// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prosody/matrix.hpp"
#include "prosody/rng.hpp"

namespace prosody::nn {

/// Parameter tensor with a same-shape gradient accumulator.
struct ValueArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;

  ValueArray() = default;
  explicit ValueArray(std::vector<std::size_t> dims);

  std::size_t size() const { return data.size(); }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
};

/// Named parameters in insertion order plus their Adam moments.
class ParameterSet {
 public:
  std::size_t add(const std::string& name, std::vector<std::size_t> shape);

  std::size_t size() const { return entries_.size(); }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  ValueArray& value(std::size_t i) { return entries_[i].value; }
  const ValueArray& value(std::size_t i) const { return entries_[i].value; }
  ValueArray& at(std::string_view name) { return value(index_of(name)); }
  const ValueArray& at(std::string_view name) const { return value(index_of(name)); }
  AdamState& adam(std::size_t i) { return entries_[i].adam; }
  const AdamState& adam(std::size_t i) const { return entries_[i].adam; }

  std::size_t total_elements() const;
  void zero_grad();

  std::uint64_t step = 0;  // Adam step count

 private:
  struct Entry {
    std::string name;
    ValueArray value;
    AdamState adam;
  };
  std::vector<Entry> entries_;
};

/// Per-parameter gradient buffers aligned with a ParameterSet; lets several
/// graphs run at once and be reduced in a fixed order afterwards.
struct GradBuffer {
  std::vector<std::vector<double>> grads;

  explicit GradBuffer(const ParameterSet& params);
  void add_into(ParameterSet& params) const;
};

struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape over 2-D row-major nodes.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var)>;

  Var constant(std::size_t rows, std::size_t cols, std::vector<double> value);
  Var constant(const Matrix& m) { return constant(m.rows, m.cols, m.data); }
  /// Leaf holding a copy of `p`; rank-1 shapes become 1 x n, rank-3 shapes
  /// (w, a, b) become (w*a) x b. Gradients accumulate into `sink` (if any).
  Var parameter(const ValueArray& p, std::span<double> sink);
  Var parameter(ValueArray& p) { return parameter(p, p.grad); }

  Var push(std::size_t rows, std::size_t cols, std::vector<double> value, Backward back);

  std::size_t rows(Var v) const { return nodes_[v.id].rows; }
  std::size_t cols(Var v) const { return nodes_[v.id].cols; }
  std::span<const double> value(Var v) const { return nodes_[v.id].value; }
  std::span<double> grad(Var v) { return nodes_[v.id].grad; }
  double scalar(Var v) const { return nodes_[v.id].value.at(0); }
  Matrix to_matrix(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(root)/d(root) = 1 and runs every recorded backward in reverse.
  void backward(Var root);

 private:
  struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    Backward back;
    std::span<double> sink;
  };
  std::vector<Node> nodes_;
};

enum class Activation { kNone, kRelu, kTanh };

// Differentiable operations. Shapes are checked; mismatches throw.
Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double factor);
Var tanh(Tape& t, Var a);
/// y = act(x W + b), x: N x I, W: I x O, b: 1 x O.
Var dense(Tape& t, Var x, Var w, Var b, Activation act = Activation::kNone);
/// Reset-after GRU: z = sig(xWz + hUz + bz), r = sig(xWr + hUr + br),
/// n = tanh(xWn + r * (hUn) + bn), h' = (1 - z) * n + z * h.
/// x: N x I, h: N x H, W: I x 3H, U: H x 3H, b: 1 x 3H (gate order z, r, n).
Var gru_step(Tape& t, Var x, Var h, Var w, Var u, Var b);
/// GRU update from a precomputed input projection ax = x W (N x 3H).
Var gru_cell(Tape& t, Var ax, Var h, Var u, Var b);
/// Rows of `table` picked by index; a negative index yields a zero row.
Var gather_rows(Tape& t, Var table, std::span<const int> indices);
/// Same-length zero-padded convolution over rows. x: T x Cin, kernel node
/// (width*Cin) x Cout, optional bias 1 x Cout. width must be odd.
Var conv1d(Tape& t, Var x, Var kernel, std::size_t width, std::optional<Var> bias = std::nullopt);
Var concat_cols(Tape& t, std::span<const Var> parts);
Var row(Tape& t, Var a, std::size_t r);
Var stack_rows(Tape& t, std::span<const Var> rows);
Var broadcast_rows(Tape& t, Var a, std::size_t n);
Var reverse_rows(Tape& t, Var a);
/// Sum over unmasked rows of -log softmax(logits)[target], divided by
/// `normalizer`. Result is 1 x 1.
Var softmax_xent(Tape& t, Var logits, std::span<const int> targets,
                 std::span<const bool> mask, double normalizer);

struct XentResult {
  double loss = 0.0;  // mean over unmasked rows
  Matrix grad;        // (softmax - onehot) / N_unmasked
  std::size_t counted = 0;
};

/// Empty mask means every row counts.
XentResult softmax_xent(const Matrix& logits, std::span<const int> targets,
                        std::span<const bool> mask = {});

/// Plain value path for inference: y[t] = sum_k x[t+k-w/2] K[k] (+ b).
void conv1d_values(std::span<const double> x, std::size_t frames, std::size_t cin,
                   std::span<const double> kernel, std::size_t width, std::size_t cout,
                   std::span<const double> bias, std::span<double> y);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam update from the accumulated gradients, then zeroes
/// them. Throws (kNumerical) naming the parameter on non-finite gradients.
void adam_step(ParameterSet& params, const AdamConfig& config = {});

/// Inverse-CDF draw from softmax(logits / temperature).
int sample_categorical(std::span<const double> logits, RngStream& rng, double temperature = 1.0);

void log_softmax(std::span<const double> logits, std::span<double> out);

/// "PCKP" checkpoint: magic, u32 count, per entry (u32 name length, name
/// bytes, u32 rank, u32 dims..., f64 data); then the Adam section in the same
/// entry format with names "<param>/adam_m" and "<param>/adam_v", preceded by
/// u32 count, and finally u64 step.
std::vector<std::uint8_t> encode_parameters(const ParameterSet& params);
/// Overwrites values (and Adam state) of a ParameterSet with matching names
/// and shapes.
void decode_parameters(std::span<const std::uint8_t> bytes, ParameterSet& params,
                       std::size_t* consumed = nullptr);

}  // namespace prosody::nn
