// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/model.hpp"
#include "prosody/nn.hpp"

namespace prosody::training {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t epochs = 9;
  std::size_t max_steps = 0;  // 0: run every epoch
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;  // epochs between accuracy measurements; the last epoch always reports
  double stop_accuracy = 0.0;  // stop once a measured accuracy reaches this (0: never)
  double clip_norm = 0.0;      // global gradient-norm clip (0: off)

  void validate() const;
  nlohmann::json to_json() const;
  /// Unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j, const TrainConfig& base);
};

/// One optimizer step over `batch`. Each utterance draws its corruption and
/// training constraints from rng.split(index). Returns the mean per-frame loss
/// (both loss terms) before the update.
double train_step(model::ProsodyModel& model, std::span<const model::UtteranceInputs> batch,
                  const nn::AdamConfig& adam, const RngStream& rng, std::size_t epoch,
                  double clip_norm = 0.0);

/// Loss of one batch without updating; mode as in training.
double batch_loss(const model::ProsodyModel& model, std::span<const model::UtteranceInputs> batch,
                  const RngStream& rng, std::size_t epoch, nn::GradBuffer* grads = nullptr);

/// Teacher-forced accuracy over voiced frames of every utterance.
model::AccuracyCount teacher_forced_accuracy(const model::ProsodyModel& model,
                                             std::span<const model::UtteranceInputs> data);

struct EpochReport {
  std::size_t epoch = 0;
  std::size_t steps = 0;       // cumulative
  double mean_loss = 0.0;
  std::optional<double> accuracy;  // teacher forced, voiced frames
};

struct TrainSummary {
  std::vector<double> step_losses;
  std::vector<EpochReport> epochs;
  std::size_t steps = 0;
};

TrainSummary train(model::ProsodyModel& model, std::span<const model::UtteranceInputs> data,
                   const TrainConfig& config,
                   const std::function<void(const EpochReport&)>& on_epoch = {});

}  // namespace prosody::training
