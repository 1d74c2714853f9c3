// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/codec.hpp"
#include "prosody/matrix.hpp"
#include "prosody/nn.hpp"
#include "prosody/pitch.hpp"
#include "prosody/rng.hpp"

namespace prosody::model {

enum class Direction { kForward, kReverse };

/// How the autoregressive input is corrupted during training.
enum class ArTraining { kDataDropout, kScheduledSampling };

enum class Mode {
  kTrainDropout,    // teacher input, zeroed with probability data_dropout_p
  kTrainScheduled,  // teacher input, replaced by a model sample with the epoch's probability
  kInfer,           // model's own samples
  kTeacherForced,   // clean teacher input, for evaluation
};

struct ModelConfig {
  std::size_t feature_width = 78;  // phoneme + embedding + V/UV + punctuation
  std::size_t fc1 = 64;
  std::size_t fc2 = 64;
  std::size_t bi_hidden = 16;
  std::size_t uni_hidden = 256;
  std::size_t n_classes = codec::kClasses;
  std::size_t postnet_layers = 5;
  std::size_t postnet_width = 5;
  std::size_t postnet_channels = 128;
  double data_dropout_p = 0.5;
  ArTraining ar_training = ArTraining::kScheduledSampling;
  double ss_max = 0.5;
  std::size_t ss_ramp_epochs = 5;
  Direction direction = Direction::kForward;
  bool use_context = true;
  bool use_constraints = true;
  std::size_t context_hidden = 128;
  std::size_t context_layers = 2;
  double output_init_scale = 0.1;

  /// Baseline: 256-unit bidirectional layer, no postnet, data dropout, no
  /// context or constraint inputs.
  static ModelConfig dar(std::size_t feature_width);
  static ModelConfig cdar(std::size_t feature_width);

  std::size_t context_width() const { return feature_width + n_classes; }
  std::size_t summary_width() const { return use_context ? 4 * context_hidden : 0; }
  std::size_t input_width() const;
  /// Model-sample probability for scheduled sampling in a 1-based epoch.
  double scheduled_probability(std::size_t epoch) const;

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected; missing keys keep the defaults of `base`.
  static ModelConfig from_json(const nlohmann::json& j, const ModelConfig& base);
  static ModelConfig from_json(const nlohmann::json& j);
};

struct ConstraintTrack {
  std::vector<bool> mask;
  std::vector<int> bins;

  static ConstraintTrack none(std::size_t frames);
  std::size_t size() const { return mask.size(); }
  std::size_t constrained_count() const;
  void validate(std::size_t frames) const;
};

struct ContextBundle {
  std::optional<Matrix> preceding;
  std::optional<Matrix> following;
  std::vector<double> summary;  // filled by summarize_context
};

struct UtteranceInputs {
  Matrix features;                 // T x feature_width
  ContextBundle context;
  std::vector<int> teacher;        // T target bins; empty when unknown
  ConstraintTrack constraints;     // empty means unconstrained
  std::vector<bool> voiced;        // T
  std::size_t frames() const { return features.rows; }
};

struct ModelOutput {
  Matrix pre_logits;               // T x 128
  Matrix post_logits;              // T x 128
  std::vector<int> sampled_bins;   // T
  /// Bin fed to the autoregressive layer at each step (-1 = zero vector).
  std::vector<int> ar_inputs;
};

struct ForwardOptions {
  std::size_t epoch = 1;       // for the scheduled-sampling ramp
  double temperature = 1.0;
};

/// Loss and outputs of one utterance recorded on a tape.
struct TrainingGraph {
  nn::Var loss;                // sum over frames; caller divides by batch frames
  nn::Var pre_logits;
  nn::Var post_logits;
  std::vector<int> ar_inputs;
  std::vector<int> sampled_bins;  // infer mode only
};

class ProsodyModel {
 public:
  ProsodyModel(ModelConfig config, std::uint64_t seed);
  /// Empty model whose parameters are later overwritten (checkpoint loading).
  explicit ProsodyModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Value-only summary (width 4 * context_hidden, zeros for absent sides).
  std::vector<double> summarize_context(const ContextBundle& ctx) const;

  /// Builds the graph of one utterance. Gradients go to `sinks` (may be null
  /// for value-only use). Train modes require a teacher.
  TrainingGraph build(nn::Tape& tape, const UtteranceInputs& in, Mode mode, RngStream& rng,
                      const ForwardOptions& opts, nn::GradBuffer* sinks) const;

  ModelOutput forward(const UtteranceInputs& in, Mode mode, RngStream& rng,
                      const ForwardOptions& opts = {}) const;

  /// Samples a contour with constrained frames forced and the voiced mask
  /// preserved, then dequantizes through `grid`.
  std::pair<ModelOutput, pitch::F0Contour> generate(const UtteranceInputs& in,
                                                    const codec::QuantGrid& grid,
                                                    RngStream& rng,
                                                    double temperature = 1.0) const;

 private:
  void declare_parameters();
  void initialize(std::uint64_t seed);

  ModelConfig config_;
  nn::ParameterSet params_;
};

/// Random training constraints: K in {0, 1, 2} segments, each 1..min(100, T)
/// frames at a uniform start, bins copied from `truth`.
ConstraintTrack sample_training_constraints(const std::vector<int>& truth, RngStream& rng);

/// Same frames in reverse order.
Matrix reverse_rows(const Matrix& m);

/// Accuracy of argmax(post_logits) restricted by V/UV over voiced frames.
struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total == 0 ? 1.0 : static_cast<double>(correct) / total; }
};
AccuracyCount voiced_accuracy(const Matrix& post_logits, const std::vector<int>& targets,
                              const std::vector<bool>& voiced);

/// Checkpoint: "PMOD", u32 header length, JSON header, then the parameter
/// payload. The header carries the config and caller-supplied metadata.
std::vector<std::uint8_t> encode_model(const ProsodyModel& model, const nlohmann::json& meta);
ProsodyModel decode_model(std::span<const std::uint8_t> bytes, nlohmann::json* meta = nullptr);
void save_model(const std::filesystem::path& path, const ProsodyModel& model,
                const nlohmann::json& meta);
ProsodyModel load_model(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace prosody::model
