// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <set>

#include "prosody/error.hpp"
#include "prosody/model.hpp"
#include "support/model_check.hpp"
#include "support/synth.hpp"

using namespace prosody;
using model::ConstraintTrack;
using model::Mode;
using model::ModelConfig;
using model::ProsodyModel;

namespace {

struct Fixture {
  std::vector<synth::Utterance> us;
  codec::QuantGrid grid;
  std::vector<model::UtteranceInputs> ins;

  explicit Fixture(std::size_t n = 3) {
    for (std::size_t i = 0; i < n; ++i) us.push_back(synth::utterance(40 + i));
    grid = synth::grid_for(us);
    for (const auto& u : us) ins.push_back(synth::inputs(u, grid));
  }
  std::size_t width() const { return ins[0].features.cols; }
};

ConstraintTrack full_track(const model::UtteranceInputs& in) {
  ConstraintTrack c = ConstraintTrack::none(in.frames());
  for (std::size_t t = 0; t < in.frames(); ++t) {
    c.mask[t] = true;
    c.bins[t] = in.teacher[t];
  }
  return c;
}

}  // namespace

TEST_CASE("config presets and json") {
  const auto c = ModelConfig::cdar(78);
  CHECK(c.bi_hidden == 16);
  CHECK(c.uni_hidden == 256);
  CHECK(c.postnet_layers == 5);
  CHECK(c.postnet_channels == 128);
  CHECK(c.ar_training == model::ArTraining::kScheduledSampling);
  CHECK(c.input_width() == 78 + 4 * 128 + 129);
  const auto d = ModelConfig::dar(78);
  CHECK(d.bi_hidden == 256);
  CHECK(d.postnet_layers == 0);
  CHECK(d.input_width() == 78);

  CHECK(c.scheduled_probability(1) == 0.0);
  CHECK(c.scheduled_probability(3) == doctest::Approx(0.25));
  CHECK(c.scheduled_probability(5) == doctest::Approx(0.5));
  CHECK(c.scheduled_probability(9) == doctest::Approx(0.5));

  const auto back = ModelConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  auto j = c.to_json();
  j["hidden_units"] = 3;
  CHECK_THROWS_AS(ModelConfig::from_json(j), Error);
  auto bad = c.to_json();
  bad["fc1"] = 0;
  CHECK_THROWS_AS(ModelConfig::from_json(bad), Error);
}

TEST_CASE("fresh model loss is near twice ln 128 per frame") {
  Fixture f(1);
  ProsodyModel m(ModelConfig::cdar(f.width()), 1);
  nn::Tape t;
  RngStream r(1);
  const auto g = m.build(t, f.ins[0], Mode::kTeacherForced, r, {}, nullptr);
  const double per_frame = t.scalar(g.loss) / static_cast<double>(f.ins[0].frames());
  CHECK(std::abs(per_frame - 2.0 * std::log(128.0)) / (2.0 * std::log(128.0)) < 0.05);
}

TEST_CASE("composed graph gradients match finite differences") {
  const auto cfg = model_check::tiny_config(10);
  SUBCASE("forward, dropout") {
    ProsodyModel m(cfg, 3);
    const auto r = model_check::check(m, model_check::tiny_inputs(cfg, 6, 1), Mode::kTrainDropout, 1, 11);
    INFO(r.where);
    CHECK(r.worst <= 1e-3);
    CHECK(r.checked == 5 * m.params().size());
  }
  SUBCASE("forward, scheduled sampling") {
    ProsodyModel m(cfg, 4);
    const auto r = model_check::check(m, model_check::tiny_inputs(cfg, 6, 2), Mode::kTrainScheduled, 5, 12);
    INFO(r.where);
    CHECK(r.worst <= 1e-3);
  }
  SUBCASE("reverse direction") {
    auto rc = cfg;
    rc.direction = model::Direction::kReverse;
    ProsodyModel m(rc, 5);
    const auto r = model_check::check(m, model_check::tiny_inputs(rc, 5, 3), Mode::kTeacherForced, 1, 13);
    INFO(r.where);
    CHECK(r.worst <= 1e-3);
  }
}

TEST_CASE("context summary") {
  const auto cfg = model_check::tiny_config(10);
  ProsodyModel m(cfg, 2);
  model::ContextBundle none;
  const auto zero = m.summarize_context(none);
  REQUIRE(zero.size() == cfg.summary_width());
  for (double v : zero) CHECK(v == 0.0);

  RngStream r(9);
  model::ContextBundle ctx;
  ctx.preceding = model_check::random_matrix(5, cfg.context_width(), r);
  const auto one = m.summarize_context(ctx);
  const std::size_t h = cfg.context_hidden;
  for (std::size_t i = 2 * h; i < 4 * h; ++i) CHECK(one[i] == 0.0);
  double mag = 0.0;
  for (std::size_t i = 0; i < 2 * h; ++i) mag += std::abs(one[i]);
  CHECK(mag > 0.0);

  model::ContextBundle flipped;
  flipped.preceding = model::reverse_rows(*ctx.preceding);
  const auto two = m.summarize_context(flipped);
  double diff = 0.0;
  for (std::size_t i = 0; i < 2 * h; ++i) diff += std::abs(one[i] - two[i]);
  CHECK(diff > 1e-9);

  model::ContextBundle wrong;
  wrong.preceding = Matrix(2, cfg.context_width() + 1);
  CHECK_THROWS_AS(m.summarize_context(wrong), Error);
}

TEST_CASE("inference respects constraints and voicing") {
  Fixture f(2);
  ProsodyModel m(synth::toy_config(f.width()), 7);

  SUBCASE("fully constrained contour is reproduced") {
    auto in = f.ins[0];
    in.constraints = full_track(in);
    RngStream r(3);
    const auto [out, contour] = m.generate(in, f.grid, r);
    CHECK(out.sampled_bins == in.teacher);
    CHECK(contour.voiced == in.voiced);
  }
  SUBCASE("all-unvoiced utterance yields bin 0") {
    auto in = f.ins[0];
    in.voiced.assign(in.frames(), false);
    RngStream r(3);
    const auto [out, contour] = m.generate(in, f.grid, r);
    for (int b : out.sampled_bins) CHECK(b == 0);
    for (bool v : contour.voiced) CHECK_FALSE(v);
  }
  SUBCASE("random constraint tracks") {
    RngStream pick(21);
    for (int trial = 0; trial < 10; ++trial) {
      auto in = f.ins[trial % 2];
      RngStream cr = pick.split(static_cast<std::uint64_t>(trial));
      in.constraints = model::sample_training_constraints(in.teacher, cr);
      RngStream r = pick.split(100 + static_cast<std::uint64_t>(trial));
      const auto [out, contour] = m.generate(in, f.grid, r);
      for (std::size_t t = 0; t < in.frames(); ++t) {
        if (in.constraints.mask[t]) CHECK(out.sampled_bins[t] == in.constraints.bins[t]);
        CHECK((out.sampled_bins[t] != 0) == in.voiced[t]);
      }
    }
  }
  SUBCASE("constrained previous frame feeds the autoregressive input") {
    auto in = f.ins[0];
    in.constraints = ConstraintTrack::none(in.frames());
    in.constraints.mask[10] = true;
    in.constraints.bins[10] = 77;
    in.voiced[10] = true;
    RngStream r(4);
    const auto out = m.forward(in, Mode::kInfer, r);
    CHECK(out.ar_inputs[11] == 77);
    CHECK(out.ar_inputs[0] == -1);
  }
}

TEST_CASE("seeds and directions") {
  Fixture f(1);
  ProsodyModel m(synth::toy_config(f.width()), 8);
  const auto& in = f.ins[0];
  RngStream a(1), b(2), a2(1);
  const auto x = m.generate(in, f.grid, a).first.sampled_bins;
  const auto y = m.generate(in, f.grid, b).first.sampled_bins;
  const auto x2 = m.generate(in, f.grid, a2).first.sampled_bins;
  CHECK(x == x2);
  CHECK(x != y);

  auto rc = synth::toy_config(f.width());
  rc.direction = model::Direction::kReverse;
  ProsodyModel rev(rc, 8);
  auto fixed = in;
  fixed.constraints = full_track(in);
  RngStream r1(5), r2(5);
  CHECK(rev.generate(fixed, f.grid, r1).first.sampled_bins == m.generate(fixed, f.grid, r2).first.sampled_bins);

  // Reverse outputs come back in forward time order.
  RngStream r3(6);
  const auto out = rev.forward(in, Mode::kTeacherForced, r3);
  CHECK(out.post_logits.rows == in.frames());
  CHECK(out.ar_inputs.back() == -1);
  CHECK(out.ar_inputs[in.frames() - 2] == in.teacher.back());
}

TEST_CASE("data dropout with probability one") {
  Fixture f(1);
  auto cfg = ModelConfig::dar(f.width());
  cfg.bi_hidden = 8;
  cfg.uni_hidden = 8;
  cfg.data_dropout_p = 1.0;
  ProsodyModel m(cfg, 2);
  RngStream r(1);
  const auto out = m.forward(f.ins[0], Mode::kTrainDropout, r);
  for (int a : out.ar_inputs) CHECK(a == -1);

  cfg.data_dropout_p = 0.0;
  ProsodyModel clean(cfg, 2);
  RngStream r2(1);
  const auto tf = clean.forward(f.ins[0], Mode::kTrainDropout, r2);
  for (std::size_t t = 1; t < f.ins[0].frames(); ++t) CHECK(tf.ar_inputs[t] == f.ins[0].teacher[t - 1]);
}

TEST_CASE("scheduled sampling at epoch 1 is teacher forcing") {
  Fixture f(1);
  ProsodyModel m(synth::toy_config(f.width()), 2);
  RngStream r(1), r2(1);
  model::ForwardOptions o;
  o.epoch = 1;
  const auto a = m.forward(f.ins[0], Mode::kTrainScheduled, r, o);
  const auto b = m.forward(f.ins[0], Mode::kTeacherForced, r2, o);
  CHECK(a.ar_inputs == b.ar_inputs);
  CHECK(a.post_logits.data == b.post_logits.data);
}

TEST_CASE("training constraints") {
  std::vector<int> truth(250);
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = 1 + static_cast<int>(i % 127);
  std::set<std::size_t> segment_counts;
  for (std::uint64_t s = 0; s < 200; ++s) {
    RngStream r(s);
    const auto c = model::sample_training_constraints(truth, r);
    REQUIRE(c.size() == truth.size());
    std::size_t runs = 0, run = 0;
    for (std::size_t t = 0; t <= c.size(); ++t) {
      if (t < c.size() && c.mask[t]) {
        CHECK(c.bins[t] == truth[t]);
        ++run;
      } else if (run > 0) {
        ++runs;
        run = 0;
      }
    }
    CHECK(runs <= 2);
    if (c.constrained_count() == 0) segment_counts.insert(0);
    else segment_counts.insert(runs);
    CHECK(c.constrained_count() <= 200);
    RngStream again(s);
    const auto d = model::sample_training_constraints(truth, again);
    CHECK(c.mask == d.mask);
  }
  CHECK(segment_counts.count(0) == 1);
  CHECK(segment_counts.count(1) == 1);

  RngStream r(3);
  const auto one = model::sample_training_constraints({5}, r);
  CHECK(one.size() == 1);
  CHECK_THROWS_AS(model::sample_training_constraints({}, r), Error);
}

TEST_CASE("constraint track validation") {
  ConstraintTrack c = ConstraintTrack::none(4);
  CHECK(c.constrained_count() == 0);
  CHECK_NOTHROW(c.validate(4));
  CHECK_THROWS_AS(c.validate(5), Error);
  c.mask[1] = true;
  c.bins[1] = 128;
  CHECK_THROWS_AS(c.validate(4), Error);
}

TEST_CASE("checkpoint round trip") {
  Fixture f(1);
  ProsodyModel m(synth::toy_config(f.width()), 12);
  const nlohmann::json meta = {{"speaker", "x"}, {"steps", 3}};
  const auto bytes = model::encode_model(m, meta);
  nlohmann::json back_meta;
  const auto back = model::decode_model(bytes, &back_meta);
  CHECK(back_meta == meta);
  CHECK(back.config().to_json() == m.config().to_json());
  for (std::size_t p = 0; p < m.params().size(); ++p) CHECK(back.params().value(p).data == m.params().value(p).data);

  const auto dir = std::filesystem::temp_directory_path() / "prosody_test_model";
  std::filesystem::create_directories(dir);
  model::save_model(dir / "m.ckpt", m, meta);
  const auto loaded = model::load_model(dir / "m.ckpt");
  RngStream a(2), b(2);
  CHECK(loaded.generate(f.ins[0], f.grid, a).first.sampled_bins ==
        m.generate(f.ins[0], f.grid, b).first.sampled_bins);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 9);
  CHECK_THROWS_AS(model::decode_model(truncated), Error);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(model::decode_model(magic), Error);
  CHECK_THROWS_AS(model::load_model(dir / "missing.ckpt"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("input validation") {
  Fixture f(1);
  ProsodyModel m(synth::toy_config(f.width()), 1);
  RngStream r(1);
  auto in = f.ins[0];
  in.teacher.clear();
  CHECK_THROWS_AS(m.forward(in, Mode::kTrainDropout, r), Error);
  CHECK_NOTHROW(m.forward(in, Mode::kInfer, r));
  auto narrow = f.ins[0];
  narrow.features = Matrix(narrow.frames(), f.width() - 1);
  CHECK_THROWS_AS(m.forward(narrow, Mode::kInfer, r), Error);
  auto mask = f.ins[0];
  mask.voiced.pop_back();
  CHECK_THROWS_AS(m.forward(mask, Mode::kInfer, r), Error);
}

TEST_CASE("voiced accuracy") {
  Matrix logits(3, 128);
  logits(0, 5) = 1.0;
  logits(1, 0) = 9.0;  // masked away on a voiced frame
  logits(1, 7) = 1.0;
  logits(2, 0) = 1.0;
  const auto a = model::voiced_accuracy(logits, {5, 7, 0}, {true, true, false});
  CHECK(a.total == 2);
  CHECK(a.correct == 2);
  CHECK(model::AccuracyCount{}.value() == 1.0);
}
