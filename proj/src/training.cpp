// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/training.hpp"

#include <cmath>
#include <numeric>

#include <omp.h>

#include "prosody/error.hpp"

namespace prosody::training {

namespace {

const char* const kComponent = "training";

model::Mode training_mode(const model::ModelConfig& c) {
  return c.ar_training == model::ArTraining::kDataDropout ? model::Mode::kTrainDropout
                                                           : model::Mode::kTrainScheduled;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw invalid_argument(kComponent, "batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw invalid_argument(kComponent, "lr must be positive");
  if (epochs == 0) throw invalid_argument(kComponent, "epochs must be positive");
  if (eval_every == 0) throw invalid_argument(kComponent, "eval_every must be positive");
  if (!(stop_accuracy >= 0.0 && stop_accuracy <= 1.0))
    throw invalid_argument(kComponent, "stop_accuracy must lie in [0,1]");
  if (!(clip_norm >= 0.0)) throw invalid_argument(kComponent, "clip_norm must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"batch_size", batch_size}, {"lr", lr}, {"epochs", epochs}, {"max_steps", max_steps}, {"seed", seed}, {"eval_every", eval_every},
          {"stop_accuracy", stop_accuracy}, {"clip_norm", clip_norm}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& base) {
  if (!j.is_object()) throw data_error(kComponent, "training config must be a JSON object");
  TrainConfig c = base;
  const auto known = c.to_json();
  for (const auto& [key, v] : j.items())
    if (!known.contains(key)) throw data_error(kComponent, "unknown training config key '" + key + "'");
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.seed = j.value("seed", c.seed);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.stop_accuracy = j.value("stop_accuracy", c.stop_accuracy);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(kComponent, std::string("bad training config value: ") + e.what());
  }
  c.validate();
  return c;
}

double batch_loss(const model::ProsodyModel& model, std::span<const model::UtteranceInputs> batch,
                  const RngStream& rng, std::size_t epoch, nn::GradBuffer* grads) {
  if (batch.empty()) throw invalid_argument(kComponent, "empty batch");
  const auto& cfg = model.config();
  const model::Mode mode = training_mode(cfg);
  std::size_t total_frames = 0;
  for (const auto& u : batch) total_frames += u.frames();
  const double inv = 1.0 / static_cast<double>(total_frames);

  // Utterances run in parallel with private gradient buffers, reduced in
  // index order so the result does not depend on the thread count.
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
  std::vector<double> losses(batch.size(), 0.0);
  for (std::size_t first = 0; first < batch.size(); first += chunk) {
    const std::size_t last = std::min(batch.size(), first + chunk);
    std::vector<std::optional<nn::GradBuffer>> bufs(last - first);
    std::vector<std::string> failures(last - first);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = first; i < last; ++i) {
      try {
        RngStream r = rng.split(i);
        model::UtteranceInputs in = batch[i];
        if (cfg.use_constraints) in.constraints = model::sample_training_constraints(in.teacher, r);
        nn::Tape tape;
        nn::GradBuffer* sink = nullptr;
        if (grads) {
          bufs[i - first].emplace(model.params());
          sink = &*bufs[i - first];
        }
        model::ForwardOptions opts;
        opts.epoch = epoch;
        const auto g = model.build(tape, in, mode, r, opts, sink);
        losses[i] = tape.scalar(g.loss);
        if (grads) tape.backward(nn::scale(tape, g.loss, inv));
      } catch (const std::exception& e) {
        failures[i - first] = e.what();
      }
    }
    for (std::size_t i = first; i < last; ++i) {
      if (!failures[i - first].empty())
        throw Error(ErrorKind::kData, kComponent, "utterance " + std::to_string(i) + " of batch: " + failures[i - first]);
      if (grads) {
        const auto& b = *bufs[i - first];
        for (std::size_t p = 0; p < b.grads.size(); ++p)
          for (std::size_t k = 0; k < b.grads[p].size(); ++k) grads->grads[p][k] += b.grads[p][k];
      }
    }
  }
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum * inv;
}

double train_step(model::ProsodyModel& model, std::span<const model::UtteranceInputs> batch,
                  const nn::AdamConfig& adam, const RngStream& rng, std::size_t epoch,
                  double clip_norm) {
  nn::GradBuffer grads(model.params());
  const double loss = batch_loss(model, batch, rng, epoch, &grads);
  if (!std::isfinite(loss))
    throw Error(ErrorKind::kNumerical, kComponent,
                "non-finite loss at step " + std::to_string(model.params().step + 1));
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& g : grads.grads)
      for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > clip_norm)
      for (auto& g : grads.grads)
        for (double& v : g) v *= clip_norm / norm;
  }
  model.params().zero_grad();
  grads.add_into(model.params());
  nn::adam_step(model.params(), adam);
  return loss;
}

model::AccuracyCount teacher_forced_accuracy(const model::ProsodyModel& model,
                                             std::span<const model::UtteranceInputs> data) {
  std::vector<model::AccuracyCount> counts(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < data.size(); ++i) {
    RngStream r(0, i);
    model::UtteranceInputs in = data[i];
    in.constraints = {};
    const auto out = model.forward(in, model::Mode::kTeacherForced, r);
    counts[i] = model::voiced_accuracy(out.post_logits, in.teacher, in.voiced);
  }
  model::AccuracyCount total;
  for (const auto& c : counts) {
    total.correct += c.correct;
    total.total += c.total;
  }
  return total;
}

TrainSummary train(model::ProsodyModel& model, std::span<const model::UtteranceInputs> data,
                   const TrainConfig& config, const std::function<void(const EpochReport&)>& on_epoch) {
  config.validate();
  if (data.empty()) throw invalid_argument(kComponent, "no training utterances");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i].teacher.size() != data[i].frames())
      throw data_error(kComponent, "utterance " + std::to_string(i) + " has no target contour");
  nn::AdamConfig adam;
  adam.lr = config.lr;
  TrainSummary summary;
  const RngStream root(config.seed, 0x7A1A);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.max_steps && summary.steps >= config.max_steps) break;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle = root.split(epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.uniform_index(i)]);

    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      if (config.max_steps && summary.steps >= config.max_steps) break;
      std::vector<model::UtteranceInputs> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k)
        batch.push_back(data[order[k]]);
      const RngStream step_rng = root.split(0x100000000ULL + summary.steps);
      const double loss = train_step(model, batch, adam, step_rng, epoch, config.clip_norm);
      summary.step_losses.push_back(loss);
      epoch_loss += loss;
      ++epoch_steps;
      ++summary.steps;
    }
    EpochReport rep;
    rep.epoch = epoch;
    rep.steps = summary.steps;
    rep.mean_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    const bool last = epoch == config.epochs || (config.max_steps && summary.steps >= config.max_steps);
    if (last || epoch % config.eval_every == 0) rep.accuracy = teacher_forced_accuracy(model, data).value();
    summary.epochs.push_back(rep);
    if (on_epoch) on_epoch(rep);
    if (config.stop_accuracy > 0.0 && rep.accuracy && *rep.accuracy >= config.stop_accuracy) break;
  }
  return summary;
}

}  // namespace prosody::training
