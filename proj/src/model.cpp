// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "prosody/error.hpp"

namespace prosody::model {

namespace {

const char* const kComponent = "prosody_model";
constexpr char kMagic[4] = {'P', 'M', 'O', 'D'};

using nn::Tape;
using nn::Var;

const char* direction_name(Direction d) { return d == Direction::kForward ? "forward" : "reverse"; }

const char* ar_name(ArTraining a) {
  return a == ArTraining::kDataDropout ? "data_dropout" : "scheduled_sampling";
}

void check(bool ok, const std::string& what) {
  if (!ok) throw invalid_argument(kComponent, what);
}

// Parameter leaves are added to a tape at most once per graph.
class Leaves {
 public:
  Leaves(Tape& t, const nn::ParameterSet& p, nn::GradBuffer* sinks)
      : tape_(t), params_(p), sinks_(sinks), vars_(p.size()) {}

  Var operator()(std::string_view name) {
    const std::size_t i = params_.index_of(name);
    if (!vars_[i]) {
      std::span<double> sink;
      if (sinks_) sink = sinks_->grads[i];
      vars_[i] = tape_.parameter(params_.value(i), sink);
    }
    return *vars_[i];
  }

 private:
  Tape& tape_;
  const nn::ParameterSet& params_;
  nn::GradBuffer* sinks_;
  std::vector<std::optional<Var>> vars_;
};

// Hidden states of a GRU over the rows of x, in time order.
std::vector<Var> run_gru(Tape& t, Leaves& leaf, Var x, const std::string& prefix,
                         std::size_t hidden, bool backwards) {
  const Var a = nn::matmul(t, x, leaf(prefix + "/W"));
  const Var u = leaf(prefix + "/U");
  const Var b = leaf(prefix + "/b");
  const std::size_t frames = t.rows(x);
  std::vector<Var> states(frames);
  Var h = t.constant(1, hidden, std::vector<double>(hidden, 0.0));
  for (std::size_t k = 0; k < frames; ++k) {
    const std::size_t i = backwards ? frames - 1 - k : k;
    h = nn::gru_cell(t, nn::row(t, a, i), h, u, b);
    states[i] = h;
  }
  return states;
}

struct BiResult {
  Var sequence;     // T x 2H
  Var final_state;  // 1 x 2H: last forward state, last backward state
};

BiResult run_bigru(Tape& t, Leaves& leaf, Var x, const std::string& prefix, std::size_t hidden) {
  const auto fw = run_gru(t, leaf, x, prefix + "/fw", hidden, false);
  const auto bw = run_gru(t, leaf, x, prefix + "/bw", hidden, true);
  const Var parts[] = {nn::stack_rows(t, fw), nn::stack_rows(t, bw)};
  const Var last[] = {fw.back(), bw.front()};
  return {nn::concat_cols(t, parts), nn::concat_cols(t, last)};
}

double sigmoid_free_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Restrict logits by the V/UV decision: unvoiced frames can only be bin 0,
// voiced frames can never be.
void mask_logits(std::vector<double>& logits, bool voiced) {
  const double ninf = -std::numeric_limits<double>::infinity();
  if (voiced) {
    logits[codec::kUnvoicedBin] = ninf;
  } else {
    for (std::size_t c = 0; c < logits.size(); ++c)
      if (static_cast<int>(c) != codec::kUnvoicedBin) logits[c] = ninf;
  }
}

template <typename T>
std::vector<T> reversed(const std::vector<T>& v) {
  return {v.rbegin(), v.rend()};
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::dar(std::size_t feature_width) {
  ModelConfig c;
  c.feature_width = feature_width;
  c.bi_hidden = 256;
  c.postnet_layers = 0;
  c.ar_training = ArTraining::kDataDropout;
  c.direction = Direction::kForward;
  c.use_context = false;
  c.use_constraints = false;
  return c;
}

ModelConfig ModelConfig::cdar(std::size_t feature_width) {
  ModelConfig c;
  c.feature_width = feature_width;
  return c;
}

std::size_t ModelConfig::input_width() const {
  return feature_width + summary_width() + (use_constraints ? n_classes + 1 : 0);
}

double ModelConfig::scheduled_probability(std::size_t epoch) const {
  if (ss_ramp_epochs <= 1) return epoch >= 1 ? ss_max : 0.0;
  const double e = static_cast<double>(std::max<std::size_t>(epoch, 1) - 1);
  return ss_max * std::min(1.0, e / static_cast<double>(ss_ramp_epochs - 1));
}

void ModelConfig::validate() const {
  check(feature_width > 0 && fc1 > 0 && fc2 > 0 && bi_hidden > 0 && uni_hidden > 0,
        "layer widths must be positive");
  check(n_classes == static_cast<std::size_t>(codec::kClasses), "n_classes must be 128");
  check(postnet_layers == 0 || (postnet_channels > 0 && postnet_width % 2 == 1),
        "postnet needs positive channels and an odd kernel width");
  check(data_dropout_p >= 0.0 && data_dropout_p <= 1.0, "data_dropout_p must lie in [0,1]");
  check(ss_max >= 0.0 && ss_max <= 1.0, "ss_max must lie in [0,1]");
  check(!use_context || (context_hidden > 0 && context_layers > 0),
        "context summarizer needs positive width and depth");
  check(output_init_scale > 0.0, "output_init_scale must be positive");
}

nlohmann::json ModelConfig::to_json() const {
  return {
      {"feature_width", feature_width},
      {"fc1", fc1},
      {"fc2", fc2},
      {"bi_hidden", bi_hidden},
      {"uni_hidden", uni_hidden},
      {"n_classes", n_classes},
      {"postnet_layers", postnet_layers},
      {"postnet_width", postnet_width},
      {"postnet_channels", postnet_channels},
      {"data_dropout_p", data_dropout_p},
      {"ar_training", ar_name(ar_training)},
      {"ss_max", ss_max},
      {"ss_ramp_epochs", ss_ramp_epochs},
      {"direction", direction_name(direction)},
      {"use_context", use_context},
      {"use_constraints", use_constraints},
      {"context_hidden", context_hidden},
      {"context_layers", context_layers},
      {"output_init_scale", output_init_scale},
  };
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j, const ModelConfig& base) {
  if (!j.is_object()) throw data_error(kComponent, "model config must be a JSON object");
  ModelConfig c = base;
  const auto known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw data_error(kComponent, "unknown model config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("feature_width", c.feature_width);
    get("fc1", c.fc1);
    get("fc2", c.fc2);
    get("bi_hidden", c.bi_hidden);
    get("uni_hidden", c.uni_hidden);
    get("n_classes", c.n_classes);
    get("postnet_layers", c.postnet_layers);
    get("postnet_width", c.postnet_width);
    get("postnet_channels", c.postnet_channels);
    get("data_dropout_p", c.data_dropout_p);
    get("ss_max", c.ss_max);
    get("ss_ramp_epochs", c.ss_ramp_epochs);
    get("use_context", c.use_context);
    get("use_constraints", c.use_constraints);
    get("context_hidden", c.context_hidden);
    get("context_layers", c.context_layers);
    get("output_init_scale", c.output_init_scale);
    if (j.contains("direction")) {
      const auto d = j.at("direction").get<std::string>();
      if (d == "forward") c.direction = Direction::kForward;
      else if (d == "reverse") c.direction = Direction::kReverse;
      else throw data_error(kComponent, "direction must be forward or reverse, got " + d);
    }
    if (j.contains("ar_training")) {
      const auto a = j.at("ar_training").get<std::string>();
      if (a == "data_dropout") c.ar_training = ArTraining::kDataDropout;
      else if (a == "scheduled_sampling") c.ar_training = ArTraining::kScheduledSampling;
      else throw data_error(kComponent, "ar_training must be data_dropout or scheduled_sampling");
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error(kComponent, std::string("bad model config value: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) { return from_json(j, ModelConfig{}); }

// ---------------------------------------------------------------------------
// ConstraintTrack

ConstraintTrack ConstraintTrack::none(std::size_t frames) {
  return {std::vector<bool>(frames, false), std::vector<int>(frames, 0)};
}

std::size_t ConstraintTrack::constrained_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

void ConstraintTrack::validate(std::size_t frames) const {
  check(mask.size() == frames && bins.size() == frames,
        "constraint track has " + std::to_string(mask.size()) + " frames, expected " +
            std::to_string(frames));
  for (std::size_t t = 0; t < frames; ++t)
    if (mask[t]) check(bins[t] >= 0 && bins[t] < codec::kClasses,
                       "constraint bin out of range at frame " + std::to_string(t));
}

ConstraintTrack sample_training_constraints(const std::vector<int>& truth, RngStream& rng) {
  const std::size_t frames = truth.size();
  check(frames >= 1, "cannot sample constraints for an empty utterance");
  ConstraintTrack c = ConstraintTrack::none(frames);
  const std::size_t segments = rng.uniform_index(3);
  const std::size_t longest = std::min<std::size_t>(100, frames);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t len = 1 + rng.uniform_index(longest);
    const std::size_t start = rng.uniform_index(frames);
    const std::size_t end = std::min(frames, start + len);
    for (std::size_t t = start; t < end; ++t) {
      c.mask[t] = true;
      c.bins[t] = truth[t];
    }
  }
  return c;
}

Matrix reverse_rows(const Matrix& m) {
  Matrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    std::copy(m.row(r).begin(), m.row(r).end(), out.row(m.rows - 1 - r).begin());
  return out;
}

AccuracyCount voiced_accuracy(const Matrix& post_logits, const std::vector<int>& targets,
                              const std::vector<bool>& voiced) {
  AccuracyCount acc;
  for (std::size_t t = 0; t < post_logits.rows; ++t) {
    if (!voiced[t]) continue;
    const auto row = post_logits.row(t);
    const auto best = std::max_element(row.begin() + 1, row.end()) - row.begin();
    ++acc.total;
    if (best == targets[t]) ++acc.correct;
  }
  return acc;
}

// ---------------------------------------------------------------------------
// ProsodyModel

ProsodyModel::ProsodyModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  declare_parameters();
}

ProsodyModel::ProsodyModel(ModelConfig config, std::uint64_t seed) : ProsodyModel(std::move(config)) {
  initialize(seed);
}

void ProsodyModel::declare_parameters() {
  const auto& c = config_;
  auto gru = [&](const std::string& prefix, std::size_t in, std::size_t hidden) {
    params_.add(prefix + "/W", {in, 3 * hidden});
    params_.add(prefix + "/U", {hidden, 3 * hidden});
    params_.add(prefix + "/b", {3 * hidden});
  };
  if (c.use_context) {
    for (const char* side : {"ctx/pre", "ctx/fol"}) {
      std::size_t in = c.context_width();
      for (std::size_t l = 0; l < c.context_layers; ++l) {
        const std::string p = std::string(side) + "/l" + std::to_string(l);
        gru(p + "/fw", in, c.context_hidden);
        gru(p + "/bw", in, c.context_hidden);
        in = 2 * c.context_hidden;
      }
    }
  }
  params_.add("fc1/W", {c.input_width(), c.fc1});
  params_.add("fc1/b", {c.fc1});
  params_.add("fc2/W", {c.fc1, c.fc2});
  params_.add("fc2/b", {c.fc2});
  gru("bi/fw", c.fc2, c.bi_hidden);
  gru("bi/bw", c.fc2, c.bi_hidden);
  params_.add("uni/W", {2 * c.bi_hidden, 3 * c.uni_hidden});
  params_.add("uni/W_prev", {c.n_classes, 3 * c.uni_hidden});
  params_.add("uni/U", {c.uni_hidden, 3 * c.uni_hidden});
  params_.add("uni/b", {3 * c.uni_hidden});
  params_.add("out/W", {c.uni_hidden, c.n_classes});
  params_.add("out/b", {c.n_classes});
  for (std::size_t l = 0; l < c.postnet_layers; ++l) {
    const std::size_t in = l == 0 ? c.n_classes : c.postnet_channels;
    const std::size_t out = l + 1 == c.postnet_layers ? c.n_classes : c.postnet_channels;
    const std::string p = "post/l" + std::to_string(l);
    params_.add(p + "/K", {c.postnet_width, in, out});
    params_.add(p + "/b", {out});
  }
}

void ProsodyModel::initialize(std::uint64_t seed) {
  const std::string last_post = "post/l" + std::to_string(config_.postnet_layers - 1) + "/K";
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_.value(i);
    const auto& name = params_.name(i);
    if (p.shape.size() == 1) continue;  // biases start at zero
    double limit;
    if (p.shape.size() == 3) {
      limit = sigmoid_free_limit(p.shape[0] * p.shape[1], p.shape[2]);
    } else if (name.ends_with("/W") || name.ends_with("/U") || name.ends_with("/W_prev")) {
      const bool gated = name.rfind("out/", 0) != 0 && name.rfind("fc", 0) != 0;
      limit = sigmoid_free_limit(p.shape[0], gated ? p.shape[1] / 3 : p.shape[1]);
    } else {
      limit = sigmoid_free_limit(p.shape[0], p.shape[1]);
    }
    if (name == "out/W" || name == last_post) limit *= config_.output_init_scale;
    RngStream rng(seed, 0x5EED0000ULL + i);
    for (double& v : p.data) v = (2.0 * rng.uniform() - 1.0) * limit;
  }
}

std::vector<double> ProsodyModel::summarize_context(const ContextBundle& ctx) const {
  check(config_.use_context, "this model has no context summarizer");
  Tape t;
  Leaves leaf(t, params_, nullptr);
  const std::size_t h = config_.context_hidden;
  std::vector<double> out(4 * h, 0.0);
  auto side = [&](const std::optional<Matrix>& m, const std::string& prefix, std::size_t offset) {
    if (!m || m->rows == 0) return;
    check(m->cols == config_.context_width(),
          "context width " + std::to_string(m->cols) + ", expected " +
              std::to_string(config_.context_width()));
    Var x = t.constant(*m);
    Var fin{};
    for (std::size_t l = 0; l < config_.context_layers; ++l) {
      const auto r = run_bigru(t, leaf, x, prefix + "/l" + std::to_string(l), h);
      x = r.sequence;
      fin = r.final_state;
    }
    const auto v = t.value(fin);
    std::copy(v.begin(), v.end(), out.begin() + static_cast<long>(offset));
  };
  side(ctx.preceding, "ctx/pre", 0);
  side(ctx.following, "ctx/fol", 2 * h);
  return out;
}

TrainingGraph ProsodyModel::build(Tape& t, const UtteranceInputs& raw, Mode mode, RngStream& rng,
                                  const ForwardOptions& opts, nn::GradBuffer* sinks) const {
  const auto& c = config_;
  const std::size_t frames = raw.frames();
  check(frames > 0, "utterance has no frames");
  check(raw.features.cols == c.feature_width,
        "feature width " + std::to_string(raw.features.cols) + ", model expects " +
            std::to_string(c.feature_width));
  check(raw.voiced.size() == frames, "voiced mask length does not match features");
  const bool training = mode == Mode::kTrainDropout || mode == Mode::kTrainScheduled;
  if (training || mode == Mode::kTeacherForced)
    check(raw.teacher.size() == frames, "teacher bins required in this mode");
  if (!raw.teacher.empty()) check(raw.teacher.size() == frames, "teacher length mismatch");
  const ConstraintTrack constraints =
      raw.constraints.size() == 0 ? ConstraintTrack::none(frames) : raw.constraints;
  constraints.validate(frames);

  // Reverse generation runs on time-flipped data with the context roles swapped.
  const bool flip = c.direction == Direction::kReverse;
  const Matrix feats = flip ? reverse_rows(raw.features) : raw.features;
  const std::vector<int> teacher = flip ? reversed(raw.teacher) : raw.teacher;
  const std::vector<bool> voiced = flip ? reversed(raw.voiced) : raw.voiced;
  const ConstraintTrack cons =
      flip ? ConstraintTrack{reversed(constraints.mask), reversed(constraints.bins)} : constraints;
  std::optional<Matrix> preceding = raw.context.preceding, following = raw.context.following;
  if (flip) {
    preceding = raw.context.following ? std::optional(reverse_rows(*raw.context.following)) : std::nullopt;
    following = raw.context.preceding ? std::optional(reverse_rows(*raw.context.preceding)) : std::nullopt;
  }

  Leaves leaf(t, params_, sinks);
  std::vector<Var> inputs{t.constant(feats)};
  if (c.use_context) {
    const std::size_t h = c.context_hidden;
    auto side = [&](const std::optional<Matrix>& m, const std::string& prefix) {
      if (!m || m->rows == 0) return t.constant(1, 2 * h, std::vector<double>(2 * h, 0.0));
      check(m->cols == c.context_width(), "context width " + std::to_string(m->cols) +
                                              ", expected " + std::to_string(c.context_width()));
      Var x = t.constant(*m);
      Var fin{};
      for (std::size_t l = 0; l < c.context_layers; ++l) {
        const auto r = run_bigru(t, leaf, x, prefix + "/l" + std::to_string(l), h);
        x = r.sequence;
        fin = r.final_state;
      }
      return fin;
    };
    const Var sides[] = {side(preceding, "ctx/pre"), side(following, "ctx/fol")};
    inputs.push_back(nn::broadcast_rows(t, nn::concat_cols(t, sides), frames));
  }
  if (c.use_constraints) {
    Matrix onehot(frames, c.n_classes + 1);
    for (std::size_t i = 0; i < frames; ++i)
      if (cons.mask[i]) {
        onehot(i, static_cast<std::size_t>(cons.bins[i])) = 1.0;
        onehot(i, c.n_classes) = 1.0;
      }
    inputs.push_back(t.constant(onehot));
  }
  const Var x = inputs.size() == 1 ? inputs[0] : nn::concat_cols(t, inputs);
  const Var h1 = nn::dense(t, x, leaf("fc1/W"), leaf("fc1/b"), nn::Activation::kRelu);
  const Var h2 = nn::dense(t, h1, leaf("fc2/W"), leaf("fc2/b"), nn::Activation::kRelu);
  const Var bi = run_bigru(t, leaf, h2, "bi", c.bi_hidden).sequence;
  const Var proj = nn::matmul(t, bi, leaf("uni/W"));
  const Var w_prev = leaf("uni/W_prev");
  const Var u = leaf("uni/U");
  const Var b = leaf("uni/b");

  const std::size_t classes = c.n_classes;
  const auto& out_w = params_.at("out/W").data;
  const auto& out_b = params_.at("out/b").data;
  const double ss_p = c.scheduled_probability(opts.epoch);
  const std::size_t half = c.postnet_width / 2;
  const std::size_t reach = c.postnet_layers * half;

  std::vector<int> ar(frames, -1);
  std::vector<int> sampled(frames, codec::kUnvoicedBin);
  std::vector<double> pre_values(frames * classes);  // filled step by step when sampling
  std::vector<Var> states(frames);
  Var h = t.constant(1, c.uni_hidden, std::vector<double>(c.uni_hidden, 0.0));

  auto step_logits = [&](std::size_t i, Var state) {
    const auto hv = t.value(state);
    double* row = pre_values.data() + i * classes;
    for (std::size_t k = 0; k < classes; ++k) row[k] = out_b[k];
    for (std::size_t j = 0; j < c.uni_hidden; ++j) {
      const double hj = hv[j];
      const double* w = out_w.data() + j * classes;
      for (std::size_t k = 0; k < classes; ++k) row[k] += hj * w[k];
    }
  };
  // Post-net output at frame i seen only through frames <= i.
  auto causal_post = [&](std::size_t i) {
    std::vector<double> logits(pre_values.begin() + static_cast<long>(i * classes),
                               pre_values.begin() + static_cast<long>((i + 1) * classes));
    if (c.postnet_layers == 0) return logits;
    const std::size_t first = i >= reach ? i - reach : 0;
    const std::size_t len = i - first + 1;
    std::vector<double> cur(pre_values.begin() + static_cast<long>(first * classes),
                            pre_values.begin() + static_cast<long>((i + 1) * classes));
    std::size_t width = classes;
    for (std::size_t l = 0; l < c.postnet_layers; ++l) {
      const std::string p = "post/l" + std::to_string(l);
      const auto& k = params_.at(p + "/K");
      const std::size_t out = k.shape[2];
      std::vector<double> next(len * out);
      nn::conv1d_values(cur, len, width, k.data, c.postnet_width, out, params_.at(p + "/b").data, next);
      if (l + 1 < c.postnet_layers)
        for (double& v : next) v = std::tanh(v);
      cur = std::move(next);
      width = out;
    }
    for (std::size_t k = 0; k < classes; ++k) logits[k] += cur[(len - 1) * classes + k];
    return logits;
  };
  auto draw = [&](std::vector<double> logits, std::size_t i) {
    mask_logits(logits, voiced[i]);
    return nn::sample_categorical(logits, rng, opts.temperature);
  };

  const bool sequential = mode == Mode::kInfer || mode == Mode::kTrainScheduled;
  for (std::size_t i = 0; i < frames; ++i) {
    if (i > 0) {
      const std::size_t p = i - 1;
      if (cons.mask[p]) {
        ar[i] = cons.bins[p];
      } else {
        switch (mode) {
          case Mode::kTeacherForced: ar[i] = teacher[p]; break;
          case Mode::kTrainDropout: ar[i] = rng.bernoulli(c.data_dropout_p) ? -1 : teacher[p]; break;
          case Mode::kTrainScheduled:
            ar[i] = rng.bernoulli(ss_p) ? draw(std::vector<double>(pre_values.begin() + static_cast<long>(p * classes),
                                                                   pre_values.begin() + static_cast<long>(i * classes)),
                                               p)
                                        : teacher[p];
            break;
          case Mode::kInfer: ar[i] = sampled[p]; break;
        }
      }
    }
    if (!sequential) continue;
    Var ax = nn::row(t, proj, i);
    if (ar[i] >= 0) {
      const int idx[] = {ar[i]};
      ax = nn::add(t, ax, nn::gather_rows(t, w_prev, idx));
    }
    h = nn::gru_cell(t, ax, h, u, b);
    states[i] = h;
    step_logits(i, h);
    if (mode == Mode::kInfer) {
      if (cons.mask[i]) sampled[i] = cons.bins[i];
      else if (!voiced[i]) sampled[i] = codec::kUnvoicedBin;
      else sampled[i] = draw(causal_post(i), i);
    }
  }
  if (!sequential) {
    const Var ax_all = nn::add(t, proj, nn::gather_rows(t, w_prev, ar));
    for (std::size_t i = 0; i < frames; ++i) {
      h = nn::gru_cell(t, nn::row(t, ax_all, i), h, u, b);
      states[i] = h;
    }
  }

  const Var hs = nn::stack_rows(t, states);
  Var pre = nn::dense(t, hs, leaf("out/W"), leaf("out/b"));
  Var post = pre;
  if (c.postnet_layers > 0) {
    Var y = pre;
    for (std::size_t l = 0; l < c.postnet_layers; ++l) {
      const std::string p = "post/l" + std::to_string(l);
      y = nn::conv1d(t, y, leaf(p + "/K"), c.postnet_width, leaf(p + "/b"));
      if (l + 1 < c.postnet_layers) y = nn::tanh(t, y);
    }
    post = nn::add(t, pre, y);
  }

  TrainingGraph g;
  if (!teacher.empty()) {
    g.loss = nn::softmax_xent(t, pre, teacher, {}, 1.0);
    if (c.postnet_layers > 0) g.loss = nn::add(t, g.loss, nn::softmax_xent(t, post, teacher, {}, 1.0));
  } else {
    g.loss = t.constant(1, 1, {0.0});
  }
  if (flip) {
    pre = nn::reverse_rows(t, pre);
    post = nn::reverse_rows(t, post);
    std::reverse(ar.begin(), ar.end());
    std::reverse(sampled.begin(), sampled.end());
  }
  g.pre_logits = pre;
  g.post_logits = post;
  g.ar_inputs = std::move(ar);
  if (mode == Mode::kInfer) g.sampled_bins = std::move(sampled);
  return g;
}

ModelOutput ProsodyModel::forward(const UtteranceInputs& in, Mode mode, RngStream& rng,
                                  const ForwardOptions& opts) const {
  Tape t;
  TrainingGraph g = build(t, in, mode, rng, opts, nullptr);
  ModelOutput out;
  out.pre_logits = t.to_matrix(g.pre_logits);
  out.post_logits = t.to_matrix(g.post_logits);
  out.ar_inputs = std::move(g.ar_inputs);
  if (mode == Mode::kInfer) {
    out.sampled_bins = std::move(g.sampled_bins);
  } else {
    // Greedy masked decode of the post-net output for the non-sampling modes.
    out.sampled_bins.resize(in.frames());
    std::vector<double> logits(config_.n_classes);
    for (std::size_t i = 0; i < in.frames(); ++i) {
      const auto row = out.post_logits.row(i);
      logits.assign(row.begin(), row.end());
      mask_logits(logits, in.voiced[i]);
      out.sampled_bins[i] =
          static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (in.constraints.size() == in.frames() && in.constraints.mask[i])
        out.sampled_bins[i] = in.constraints.bins[i];
    }
  }
  return out;
}

std::pair<ModelOutput, pitch::F0Contour> ProsodyModel::generate(const UtteranceInputs& in,
                                                                const codec::QuantGrid& grid,
                                                                RngStream& rng,
                                                                double temperature) const {
  ForwardOptions opts;
  opts.temperature = temperature;
  ModelOutput out = forward(in, Mode::kInfer, rng, opts);
  codec::QuantizedF0 q;
  q.bins = out.sampled_bins;
  pitch::F0Contour contour = codec::dequantize(q, grid);
  return {std::move(out), std::move(contour)};
}

// ---------------------------------------------------------------------------
// Checkpoints

std::vector<std::uint8_t> encode_model(const ProsodyModel& model, const nlohmann::json& meta) {
  const nlohmann::json header = {{"format", 1}, {"config", model.config().to_json()}, {"meta", meta}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), text.begin(), text.end());
  const auto payload = nn::encode_parameters(model.params());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

ProsodyModel decode_model(std::span<const std::uint8_t> bytes, nlohmann::json* meta) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw data_error("checkpoint", "not a model checkpoint (bad magic)");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t{bytes[4 + i]} << (8 * i);
  if (8 + std::size_t{len} > bytes.size()) throw data_error("checkpoint", "truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + len);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("checkpoint", std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.contains("config")) throw data_error("checkpoint", "header lacks a config");
  ProsodyModel model(ModelConfig::from_json(header.at("config")));
  std::size_t used = 0;
  nn::decode_parameters(bytes.subspan(8 + len), model.params(), &used);
  if (8 + len + used != bytes.size()) throw data_error("checkpoint", "trailing bytes after payload");
  if (meta) *meta = header.value("meta", nlohmann::json::object());
  return model;
}

void save_model(const std::filesystem::path& path, const ProsodyModel& model,
                const nlohmann::json& meta) {
  const auto bytes = encode_model(model, meta);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("checkpoint", "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw data_error("checkpoint", "write failed for " + path.string());
}

ProsodyModel load_model(const std::filesystem::path& path, nlohmann::json* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kNotFound, "checkpoint", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_model(bytes, meta);
}

}  // namespace prosody::model
