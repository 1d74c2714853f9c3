// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>

#include "prosody/baselines.hpp"
#include "prosody/contour_io.hpp"
#include "prosody/evaluation.hpp"
#include "prosody/psola.hpp"
#include "prosody/training.hpp"
#include "support/gradcheck.hpp"
#include "support/model_check.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace prosody;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > budget_s) {
    o.pass = false;
    o.detail += "; over time budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s %s: %s [%.1f s, budget %.0f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s,
              budget_s);
  std::fflush(stdout);
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double cents(double a, double b) { return 1200.0 * std::abs(std::log2(a / b)); }

std::size_t max_jump(const std::vector<std::int32_t>& path) {
  std::size_t worst = 0;
  for (std::size_t t = 1; t < path.size(); ++t)
    worst = std::max<std::size_t>(worst, static_cast<std::size_t>(std::abs(path[t] - path[t - 1])));
  return worst;
}

std::vector<double> random_post(std::size_t frames, std::size_t bins, RngStream& r, double floor = 0.01) {
  std::vector<double> v(frames * bins);
  for (double& x : v) x = floor + r.uniform();
  for (std::size_t t = 0; t < frames; ++t) {
    double s = 0.0;
    for (std::size_t b = 0; b < bins; ++b) s += v[t * bins + b];
    for (std::size_t b = 0; b < bins; ++b) v[t * bins + b] /= s;
  }
  return v;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PROSODY_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

pitch::F0Contour set_to(const pitch::F0Contour& c, double hz) {
  pitch::F0Contour out = c;
  for (std::size_t t = 0; t < out.size(); ++t)
    if (out.voiced[t]) out.hz[t] = hz;
  return out;
}

// Fraction of `voiced` frames where `got` is voiced and within `tol` cents of hz.
double agreement(const pitch::F0Contour& got, const std::vector<bool>& voiced, double hz, double tol) {
  std::size_t n = 0, ok = 0;
  for (std::size_t t = 0; t < voiced.size(); ++t) {
    if (!voiced[t]) continue;
    ++n;
    if (got.voiced[t] && cents(got.hz[t], hz) <= tol) ++ok;
  }
  return n == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(n);
}

struct ToyCorpus {
  std::vector<synth::Utterance> us;
  std::vector<model::UtteranceInputs> ins;
  codec::QuantGrid grid;
  ToyCorpus() {
    for (std::uint64_t i = 0; i < 20; ++i) us.push_back(synth::utterance(200 + i));
    grid = synth::grid_for(us);
    for (const auto& u : us) ins.push_back(synth::inputs(u, grid));
  }
};

std::optional<model::ProsodyModel> trained;

Outcome viterbi() {
  RngStream r(2024, 1);
  std::size_t instances = 0, mismatches = 0, worst = 0;
  double decode_s = 0.0;
  while (instances < 100) {
    const std::size_t frames = 1 + r.uniform_index(8);
    const std::size_t bins = 2 + r.uniform_index(14);
    if (std::pow(static_cast<double>(bins), static_cast<double>(frames)) > 2e6) continue;
    const auto v = random_post(frames, bins, r);
    const auto t0 = std::chrono::steady_clock::now();
    const auto path = pitch::viterbi_decode(pitch::Posteriorgram(frames, bins, v));
    decode_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (path != oracle::brute_force_path(v, frames, bins)) ++mismatches;
    worst = std::max(worst, max_jump(path));
    ++instances;
  }
  // Jump cap on the full grid: random rows, sparse adversarial peaks and real analyses.
  for (int n = 0; n < 10; ++n) {
    const std::size_t frames = 200;
    worst = std::max(worst, max_jump(pitch::viterbi_decode(
                                pitch::Posteriorgram(frames, pitch::kBins, random_post(frames, pitch::kBins, r, 1e-9)))));
    std::vector<double> v(frames * pitch::kBins, 1e-12);
    for (std::size_t t = 0; t < frames; ++t) v[t * pitch::kBins + (t % 2 ? 10 : 340) + r.uniform_index(10)] = 1.0;
    worst = std::max(worst, max_jump(pitch::viterbi_decode(pitch::Posteriorgram(frames, pitch::kBins, v))));
  }
  for (double hz : {90.0, 200.0, 420.0}) {
    const auto a = synth::vowel(synth::constant_contour(80, hz, 10, 10));
    const auto pg = pitch::candidate_posteriorgram(a, audio::FrameGrid::for_audio(a));
    worst = std::max(worst, max_jump(pitch::viterbi_decode(pg.posteriorgram)));
  }
  return {mismatches == 0 && worst <= pitch::kMaxJumpBins && decode_s < 10.0,
          fmt("%zu/100 equal exhaustive enumeration, max jump %zu bins (cap 12), decode time %.3f s (< 10 s)",
              instances - mismatches, worst, decode_s)};
}

Outcome quantizer() {
  RngStream r(7, 2);
  const codec::QuantGrid grid{std::log2(180.0), 0.3};
  const double bound = 4.0 * grid.sigma / 127.0;
  pitch::F0Contour c;
  for (int i = 0; i < 10000; ++i) {
    c.hz.push_back(std::exp2(grid.lo() + r.uniform() * (grid.hi() - grid.lo())));
    c.voiced.push_back(true);
  }
  for (int i = 0; i < 2000; ++i) {
    c.hz.push_back(r.bernoulli(0.5) ? 0.0 : 50.0 + 500.0 * r.uniform());
    c.voiced.push_back(false);
  }
  const auto qz = codec::quantize(c, grid);
  const auto back = codec::dequantize(qz, grid);
  double worst = 0.0;
  std::size_t bijection_errors = 0;
  int lo = 1000, hi = -1;
  for (std::size_t t = 0; t < c.size(); ++t) {
    if ((qz.bins[t] == 0) != !c.voiced[t] || back.voiced[t] != c.voiced[t]) ++bijection_errors;
    if (c.voiced[t]) worst = std::max(worst, std::abs(std::log2(back.hz[t]) - std::log2(c.hz[t])));
    lo = std::min(lo, qz.bins[t]);
    hi = std::max(hi, qz.bins[t]);
  }
  // Out-of-range voiced frequencies clamp into 1..127 and stay voiced.
  for (double hz : {1.0, 20.0, 5000.0}) {
    const int b = codec::quantize_hz(hz, grid);
    if (b < 1 || b > 127) ++bijection_errors;
  }
  return {worst <= bound + 1e-12 && bijection_errors == 0 && lo == 0 && hi == 127 && codec::kClasses == 128,
          fmt("max |log2 error| %.3e (bound 4 sigma/127 = %.3e), V/UV bijection errors %zu, bins used %d..%d, "
              "classes %zu",
              worst, bound, bijection_errors, lo, hi, static_cast<std::size_t>(codec::kClasses))};
}

Outcome gradients() {
  double ops = 0.0;
  std::string worst_op;
  for (const auto& op : gradcheck::op_cases())
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const double e = gradcheck::check(op, seed);
      if (e > ops) {
        ops = e;
        worst_op = op.name;
      }
    }
  const auto cfg = model_check::tiny_config(10);
  auto rc = cfg;
  rc.direction = model::Direction::kReverse;
  auto dar = model::ModelConfig::dar(10);
  dar.fc1 = 6;
  dar.fc2 = 5;
  dar.uni_hidden = 7;
  dar.context_hidden = 3;
  dar.data_dropout_p = 0.3;
  double composed = 0.0;
  std::size_t checked = 0;
  for (const auto& r : {model_check::check(model::ProsodyModel(cfg, 3), model_check::tiny_inputs(cfg, 6, 1),
                                           model::Mode::kTrainDropout, 1, 11),
                        model_check::check(model::ProsodyModel(cfg, 4), model_check::tiny_inputs(cfg, 6, 2),
                                           model::Mode::kTrainScheduled, 5, 12),
                        model_check::check(model::ProsodyModel(rc, 5), model_check::tiny_inputs(rc, 5, 3),
                                           model::Mode::kTeacherForced, 1, 13),
                        model_check::check(model::ProsodyModel(dar, 6), model_check::tiny_inputs(dar, 6, 4),
                                           model::Mode::kTrainDropout, 1, 14)}) {
    composed = std::max(composed, r.worst);
    checked += r.checked;
  }
  return {ops <= 1e-4 && composed <= 1e-3,
          fmt("ops worst relative error %.2e (<= 1e-4, %s), composed graph worst %.2e over %zu coordinates (<= 1e-3)",
              ops, worst_op.c_str(), composed, checked)};
}

Outcome loss_sanity() {
  const ToyCorpus data;
  const std::size_t width = data.ins[0].features.cols;
  const model::ProsodyModel fresh(model::ModelConfig::cdar(width), 1);
  const double fresh_loss = training::batch_loss(fresh, data.ins, RngStream(1), 1);
  const double target = 2.0 * std::log(128.0);
  const double rel = std::abs(fresh_loss - target) / target;

  model::ProsodyModel m(synth::toy_config(width), 3);
  training::TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.lr = 0.005;
  cfg.clip_norm = 1.0;
  cfg.epochs = 400;
  cfg.max_steps = 2000;
  cfg.eval_every = 4;
  cfg.stop_accuracy = 0.9;
  cfg.seed = 1;
  const auto summary = training::train(m, data.ins, cfg);
  const double acc = training::teacher_forced_accuracy(m, data.ins).value();
  trained = std::move(m);
  return {rel <= 0.05 && acc >= 0.9 && summary.steps <= 2000,
          fmt("fresh C-DAR loss %.3f per frame vs 2 ln 128 = %.3f (%.2f%%, <= 5%%); toy corpus teacher-forced "
              "accuracy %.1f%% after %zu steps (>= 90%% within 2000)",
              fresh_loss, target, 100.0 * rel, 100.0 * acc, summary.steps)};
}

Outcome constraint_adherence() {
  if (!trained) return {false, "no trained model"};
  const ToyCorpus data;
  RngStream r(50, 5);
  std::size_t constrained = 0, exact = 0, frames = 0, vuv_ok = 0;
  for (std::size_t k = 0; k < 50; ++k) {
    auto in = data.ins[k % data.ins.size()];
    const std::size_t T = in.frames();
    in.constraints = model::ConstraintTrack::none(T);
    const std::size_t segments = 1 + r.uniform_index(3);
    for (std::size_t s = 0; s < segments; ++s) {
      const std::size_t len = 1 + r.uniform_index(std::min<std::size_t>(T, 40));
      const std::size_t start = r.uniform_index(T - len + 1);
      for (std::size_t t = start; t < start + len; ++t) {
        in.constraints.mask[t] = true;
        in.constraints.bins[t] = in.voiced[t] ? 1 + static_cast<int>(r.uniform_index(127)) : 0;
      }
    }
    RngStream g(k, 6);
    const auto [out, contour] = trained->generate(in, data.grid, g);
    for (std::size_t t = 0; t < T; ++t) {
      ++frames;
      if ((out.sampled_bins[t] != 0) == in.voiced[t] && contour.voiced[t] == in.voiced[t]) ++vuv_ok;
      if (!in.constraints.mask[t]) continue;
      ++constrained;
      if (out.sampled_bins[t] == in.constraints.bins[t]) ++exact;
    }
  }
  return {exact == constrained && vuv_ok == frames && constrained > 0,
          fmt("50 random tracks: %zu/%zu constrained frames exact (100%%), V/UV preserved on %zu/%zu frames (100%%)",
              exact, constrained, vuv_ok, frames)};
}

Outcome psola_fidelity() {
  const auto truth = synth::constant_contour(100, 200.0, 10, 10);
  const auto audio = synth::vowel(truth);
  const auto analysis = pitch::analyze(audio);

  const auto same = psola::shift(audio, analysis, analysis);
  double sig = 0.0, err = 0.0;
  for (std::size_t n = 20 * 160; n < 80 * 160; ++n) {
    sig += audio.samples[n] * audio.samples[n];
    err += (same.samples[n] - audio.samples[n]) * (same.samples[n] - audio.samples[n]);
  }
  const double snr = 10.0 * std::log10(sig / err);

  double worst_shift = 1.0;
  for (double hz : {150.0, 300.0}) {
    const auto out = psola::shift(audio, analysis, set_to(analysis, hz));
    worst_shift = std::min(worst_shift, agreement(pitch::analyze(out), truth.voiced, hz, 15.0));
  }

  const auto up = psola::shift(audio, analysis, set_to(analysis, 300.0));
  const auto up_analysis = pitch::analyze(up);
  auto back = analysis;
  for (std::size_t t = 0; t < back.size(); ++t) {
    back.voiced[t] = up_analysis.voiced[t];
    back.hz[t] = back.voiced[t] ? 200.0 : 0.0;
  }
  const double round = agreement(pitch::analyze(psola::shift(up, up_analysis, back)), truth.voiced, 200.0, 20.0);
  return {worst_shift >= 0.8 && snr >= 20.0 && round >= 0.8,
          fmt("200 Hz vowel to 150/300 Hz within 15 cents on %.1f%% of voiced frames (>= 80%%); identity SNR "
              "%.1f dB (>= 20); shift-unshift within 20 cents on %.1f%% (>= 80%%)",
              100.0 * worst_shift, snr, 100.0 * round)};
}

Outcome lowpass() {
  pitch::F0Contour truth = synth::constant_contour(120, 0.0, 10, 10);
  for (std::size_t t = 0; t < truth.size(); ++t) truth.hz[t] = 150.0 + 60.0 * std::sin(0.05 * static_cast<double>(t));
  auto audio = synth::vowel(truth);
  RngStream g(5);
  for (double& s : audio.samples) s += 0.01 * (2.0 * g.uniform() - 1.0);
  const auto before = pitch::analyze(audio);
  double max_hz = 0.0;
  for (std::size_t t = 0; t < before.size(); ++t)
    if (before.voiced[t]) max_hz = std::max(max_hz, before.hz[t]);
  const double cutoff = evaluation::stimulus_cutoff(before);
  const auto stimulus = evaluation::make_lowpass_stimulus(audio, before);

  const double in = oracle::band_energy(audio.samples, 4000, 8192, 16000, cutoff + 20.0, 8000.0);
  const double out = oracle::band_energy(stimulus.samples, 4000, 8192, 16000, cutoff + 20.0, 8000.0);
  const double atten = 10.0 * std::log10(in / out);

  const auto after = pitch::analyze(stimulus);
  std::size_t n = 0, ok = 0;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!truth.voiced[t]) continue;
    ++n;
    if (after.voiced[t] && before.voiced[t] && cents(after.hz[t], before.hz[t]) <= 20.0 + 1e-6) ++ok;
  }
  const double frac = static_cast<double>(ok) / static_cast<double>(n);
  return {cutoff == max_hz + 10.0 && atten >= 60.0 && frac >= 0.95,
          fmt("cutoff %.2f Hz = max F0 %.2f + 10; stopband attenuation %.1f dB (>= 60); re-analysis within 20 cents "
              "on %.1f%% of voiced frames (>= 95%%)",
              cutoff, max_hz, atten, 100.0 * frac)};
}

Outcome metric_identities() {
  RngStream r(8, 8);
  double worst_rmse = 0.0, worst_monotone = 0.0;
  bool vuv = true;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto u = synth::utterance(s);
    worst_rmse = std::max(worst_rmse, evaluation::rmse(u.contour, u.contour).value);
    vuv = vuv && evaluation::vuv_prf(u.contour.voiced, u.contour.voiced) == std::pair(1.0, 1.0);
    std::vector<double> logs;
    for (std::size_t t = 0; t < u.frames; ++t)
      if (u.contour.voiced[t]) logs.push_back(std::log2(u.contour.hz[t]));
    double mean = 0.0, ss = 0.0;
    for (double x : logs) mean += x / static_cast<double>(logs.size());
    for (double x : logs) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(logs.size()));
    const pitch::F0Contour one[] = {u.contour};
    const auto mono = baselines::monotone(u.contour, pitch::speaker_stats(one));
    worst_monotone = std::max(worst_monotone, std::abs(evaluation::rmse(u.contour, mono).value - sd));
  }
  codec::QuantizedF0 ref;
  std::vector<bool> voiced;
  for (int t = 0; t < 200; ++t) {
    voiced.push_back(t % 7 != 0);
    ref.bins.push_back(voiced.back() ? 1 + static_cast<int>(r.uniform_index(127)) : 0);
  }
  const double nll = evaluation::nll(Matrix(200, 128), ref, voiced).value;
  const double nll_err = std::abs(nll - std::log(128.0));
  return {worst_rmse == 0.0 && vuv && nll_err <= 1e-9 && worst_monotone <= 1e-6,
          fmt("rmse(c, c) max %.1e (= 0); vuv_prf(m, m) = (1, 1): %s; uniform NLL - ln 128 = %.1e (<= 1e-9); "
              "|rmse(monotone) - voiced log2 std| max %.1e (<= 1e-6)",
              worst_rmse, vuv ? "yes" : "no", nll_err, worst_monotone)};
}

Outcome determinism(const fs::path& dir) {
  // In process: training, generation and PSOLA twice from the same seeds.
  ToyCorpus data;
  data.ins.resize(6);
  const std::size_t width = data.ins[0].features.cols;
  training::TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.epochs = 3;
  cfg.lr = 0.005;
  cfg.seed = 21;
  auto once = [&] {
    model::ProsodyModel m(synth::toy_config(width), 21);
    training::train(m, data.ins, cfg);
    const auto ckpt = model::encode_model(m, {{"seed", 21}});
    RngStream g(4, 0);
    const auto contour = m.generate(data.ins[0], data.grid, g).second;
    const auto audio = synth::vowel(data.us[0].contour);
    const auto analysis = pitch::analyze(audio);
    auto target = contour;
    for (std::size_t t = 0; t < target.size(); ++t) {
      target.voiced[t] = analysis.voiced[t];
      target.hz[t] = analysis.voiced[t] ? (contour.voiced[t] ? contour.hz[t] : analysis.hz[t]) : 0.0;
    }
    const auto wav = audio::encode_wav(psola::shift(audio, analysis, target));
    return std::tuple(ckpt, io::contour_to_json(contour).dump(), wav);
  };
  const bool in_process = once() == once();

  // Across processes through the CLI.
  std::vector<synth::Utterance> us(data.us.begin(), data.us.begin() + 4);
  const auto manifest = synth::write_corpus(dir / "corpus", us);
  const nlohmann::json small = {{"model", {{"fc1", 8}, {"fc2", 8}, {"uni_hidden", 8}, {"postnet_channels", 4},
                                           {"context_hidden", 4}, {"context_layers", 1}}},
                                {"train", {{"epochs", 2}, {"batch_size", 2}, {"seed", 3}}}};
  io::write_atomic(dir / "cfg.json", std::string_view(small.dump()));
  const auto& u = us[0];
  const fs::path c = dir / "corpus";
  bool cli_ok = true;
  for (const char* tag : {"a", "b"}) {
    const std::string t(tag);
    cli_ok = cli_ok &&
             run_cli("--config " + q(dir / "cfg.json") + " train " + q(manifest) + " -o " + q(dir / (t + ".ckpt"))) == 0 &&
             run_cli("generate --model " + q(dir / (t + ".ckpt")) + " --alignment " + q(c / (u.id + ".align.json")) +
                     " --embeddings " + q(c / (u.id + ".emb")) + " --contour " + q(c / (u.id + ".f0.json")) +
                     " --seed 5 -o " + q(dir / (t + ".json"))) == 0 &&
             run_cli("analyze " + q(c / (u.id + ".wav")) + " -o " + q(dir / (t + ".an.json"))) == 0 &&
             run_cli("shift " + q(c / (u.id + ".wav")) + " --target " + q(dir / (t + ".an.json")) + " -o " +
                     q(dir / (t + ".wav"))) == 0;
  }
  bool cli_same = cli_ok;
  for (const char* ext : {".ckpt", ".json", ".wav"})
    cli_same = cli_same && io::read_bytes(dir / (std::string("a") + ext)) == io::read_bytes(dir / (std::string("b") + ext));
  return {in_process && cli_same,
          fmt("in-process checkpoint/contour/WAV byte-identical: %s; two CLI runs (train, generate, shift) "
              "byte-identical: %s",
              in_process ? "yes" : "no", cli_same ? "yes" : "no")};
}

Outcome end_to_end(const fs::path& dir) {
  const auto u = synth::utterance(7);
  audio::write_wav(dir / "in.wav", synth::vowel(u.contour));
  const bool ok = run_cli("analyze " + q(dir / "in.wav") + " -o " + q(dir / "f0.json")) == 0 &&
                  run_cli("quantize " + q(dir / "f0.json") + " -o " + q(dir / "q.json")) == 0 &&
                  run_cli("dequantize " + q(dir / "q.json") + " -o " + q(dir / "dq.json")) == 0 &&
                  run_cli("shift " + q(dir / "in.wav") + " --target " + q(dir / "dq.json") + " --analysis " +
                          q(dir / "f0.json") + " -o " + q(dir / "out.wav")) == 0 &&
                  run_cli("analyze " + q(dir / "out.wav") + " -o " + q(dir / "re.json")) == 0;
  if (!ok) return {false, "CLI pipeline failed"};
  const auto f0 = io::contour_from_json(io::parse_json(io::read_text(dir / "f0.json"), "f0"));
  const auto re = io::contour_from_json(io::parse_json(io::read_text(dir / "re.json"), "re"));
  const auto [qz, grid] = io::quantized_from_json(io::parse_json(io::read_text(dir / "q.json"), "q"));
  const double tol = 1200.0 * 4.0 * grid.sigma / 127.0 + 20.0;
  std::size_t n = 0, within = 0;
  for (std::size_t t = 0; t < f0.size(); ++t) {
    if (!u.contour.voiced[t]) continue;
    ++n;
    if (f0.voiced[t] && re.voiced[t] && cents(re.hz[t], f0.hz[t]) <= tol + 1e-6) ++within;
  }
  const double frac = static_cast<double>(within) / static_cast<double>(n);
  return {frac >= 0.95,
          fmt("CLI analyze|quantize|dequantize|shift|analyze: %.1f%% of voiced frames within %.1f cents "
              "(quantization bound + 20; >= 95%%)",
              100.0 * frac, tol)};
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "prosody_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch / "det");
  fs::create_directories(scratch / "e2e");

  criterion("viterbi_correctness", 60, viterbi);
  criterion("quantizer_bound", 1, quantizer);
  criterion("gradient_integrity", 120, gradients);
  criterion("loss_sanity", 600, loss_sanity);
  criterion("constraint_adherence", 60, constraint_adherence);
  criterion("psola_fidelity", 30, psola_fidelity);
  criterion("lowpass_stimulus", 30, lowpass);
  criterion("metric_identities", 10, metric_identities);
  criterion("determinism", 120, [&] { return determinism(scratch / "det"); });
  criterion("end_to_end_cli", 60, [&] { return end_to_end(scratch / "e2e"); });

  fs::remove_all(scratch);
  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
