// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>

#include "prosody/baselines.hpp"
#include "prosody/error.hpp"
#include "prosody/model.hpp"
#include "prosody/nn.hpp"

namespace prosody::evaluation {

namespace {

const char* const kComponent = "evaluation";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

RmseResult rmse(const pitch::F0Contour& reference, const pitch::F0Contour& hypothesis) {
  if (reference.size() != hypothesis.size())
    throw invalid_argument(kComponent, "rmse: contours have " + std::to_string(reference.size()) + " and " +
                                           std::to_string(hypothesis.size()) + " frames");
  RmseResult r;
  for (std::size_t t = 0; t < reference.size(); ++t) {
    if (!reference.voiced[t] || !hypothesis.voiced[t]) continue;
    const double d = std::log2(hypothesis.hz[t]) - std::log2(reference.hz[t]);
    r.sum_squares += d * d;
    ++r.mutual_voiced;
  }
  if (r.mutual_voiced == 0) {
    r.warning = true;
    return r;
  }
  r.value = std::sqrt(r.sum_squares / static_cast<double>(r.mutual_voiced));
  return r;
}

NllResult nll(const Matrix& post_logits, const codec::QuantizedF0& reference, const std::vector<bool>& voiced) {
  if (post_logits.rows != reference.size() || voiced.size() != reference.size())
    throw invalid_argument(kComponent, "nll: logits, reference and mask lengths differ");
  NllResult r;
  std::vector<double> lp(post_logits.cols);
  double sum = 0.0;
  for (std::size_t t = 0; t < post_logits.rows; ++t) {
    if (!voiced[t]) continue;
    const int b = reference.bins[t];
    if (b < 0 || static_cast<std::size_t>(b) >= post_logits.cols)
      throw invalid_argument(kComponent, "nll: reference bin out of range");
    nn::log_softmax(post_logits.row(t), lp);
    sum -= lp[static_cast<std::size_t>(b)];
    ++r.frames;
  }
  if (r.frames == 0) {
    r.warning = true;
    return r;
  }
  r.value = sum / static_cast<double>(r.frames);
  return r;
}

VuvCounts vuv_counts(const std::vector<bool>& reference, const std::vector<bool>& hypothesis) {
  if (reference.size() != hypothesis.size())
    throw invalid_argument(kComponent, "vuv: masks have different lengths");
  VuvCounts c;
  for (std::size_t t = 0; t < reference.size(); ++t) {
    if (reference[t] && hypothesis[t]) ++c.tp;
    else if (!reference[t] && hypothesis[t]) ++c.fp;
    else if (reference[t] && !hypothesis[t]) ++c.fn;
  }
  return c;
}

std::pair<double, double> vuv_prf(const std::vector<bool>& reference, const std::vector<bool>& hypothesis) {
  const auto c = vuv_counts(reference, hypothesis);
  return {c.precision(), c.recall()};
}

double stimulus_cutoff(const pitch::F0Contour& contour) {
  contour.validate();
  double top = 0.0;
  for (std::size_t t = 0; t < contour.size(); ++t)
    if (contour.voiced[t]) top = std::max(top, contour.hz[t]);
  if (top <= 0.0) throw invalid_argument(kComponent, "low-pass stimulus needs at least one voiced frame");
  return top + 10.0;
}

audio::AudioBuffer make_lowpass_stimulus(const audio::AudioBuffer& audio, const pitch::F0Contour& contour) {
  return audio::lowpass_render(audio, stimulus_cutoff(contour));
}

SystemSpec parse_system(const std::string& text) {
  SystemSpec s;
  s.label = text;
  if (text == "identity") s.kind = SystemKind::kIdentity;
  else if (text == "monotone") s.kind = SystemKind::kMonotone;
  else if (text == "swap") s.kind = SystemKind::kSwap;
  else if (text == "replace") s.kind = SystemKind::kReplace;
  else if (text.rfind("model:", 0) == 0 && text.size() > 6) {
    s.kind = SystemKind::kModel;
    s.checkpoint = text.substr(6);
  } else {
    throw invalid_argument(kComponent, "unknown system '" + text +
                                           "' (expected identity, monotone, swap, replace or model:<checkpoint>)");
  }
  return s;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string EvalReport::csv() const {
  std::ostringstream out;
  out << "utterance,system,frames,voiced_frames,mutual_voiced,rmse_log2,nll,vuv_precision,vuv_recall,warning\n";
  for (const auto& r : rows) {
    out << r.utterance << ',' << r.system << ',' << r.frames << ',' << r.voiced_frames << ','
        << r.rmse.mutual_voiced << ',' << fmt(r.rmse.value) << ',' << (r.nll ? fmt(r.nll->value) : "") << ','
        << fmt(r.vuv.precision()) << ',' << fmt(r.vuv.recall()) << ',' << r.warning << '\n';
  }
  return out.str();
}

nlohmann::json EvalReport::aggregate_json() const {
  nlohmann::json j;
  j["systems"] = nlohmann::json::array();
  for (const auto& s : systems) {
    nlohmann::json e = {{"system", s.system},
                        {"utterances", s.utterances},
                        {"frames", s.frames},
                        {"voiced_frames", s.voiced_frames},
                        {"mutual_voiced", s.mutual_voiced},
                        {"rmse_log2", s.rmse_log2},
                        {"vuv_precision", s.vuv.precision()},
                        {"vuv_recall", s.vuv.recall()}};
    e["nll"] = s.nll ? nlohmann::json(*s.nll) : nlohmann::json(nullptr);
    j["systems"].push_back(e);
  }
  j["exclusions"] = nlohmann::json::array();
  for (const auto& x : exclusions) j["exclusions"].push_back({{"utterance", x.id}, {"reason", x.reason}});
  j["provenance"] = provenance;
  return j;
}

EvalReport eval_run(const corpus::Manifest& manifest, const std::vector<SystemSpec>& systems,
                    const EvalOptions& options) {
  if (systems.empty()) throw invalid_argument(kComponent, "no systems to evaluate");
  const corpus::Corpus data = corpus::load_corpus(manifest, true);

  std::vector<std::unique_ptr<model::ProsodyModel>> models(systems.size());
  nlohmann::json model_meta = nlohmann::json::object();
  for (std::size_t s = 0; s < systems.size(); ++s) {
    if (systems[s].kind != SystemKind::kModel) continue;
    nlohmann::json meta;
    models[s] = std::make_unique<model::ProsodyModel>(model::load_model(systems[s].checkpoint, &meta));
    if (models[s]->config().feature_width != data.utterances.front().features.matrix.cols)
      throw data_error(kComponent, systems[s].label + ": model feature width " +
                                       std::to_string(models[s]->config().feature_width) +
                                       " does not match corpus features");
    model_meta[systems[s].label] = meta;
  }
  baselines::WordContourBank bank;
  for (const auto& u : data.utterances) bank.add_utterance(data.speaker, u.contour, u.alignment);

  const std::size_t n = data.utterances.size();
  std::vector<std::vector<UtteranceRow>> rows(n);
  std::vector<std::string> failures(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto& u = data.utterances[i];
      for (std::size_t s = 0; s < systems.size(); ++s) {
        RngStream rng(options.seed, i * 1000003ULL + s);
        UtteranceRow row;
        row.utterance = u.id;
        row.system = systems[s].label;
        row.frames = u.contour.size();
        row.voiced_frames = u.contour.voiced_count();
        pitch::F0Contour hyp;
        switch (systems[s].kind) {
          case SystemKind::kIdentity: hyp = u.contour; break;
          case SystemKind::kMonotone: hyp = baselines::monotone(u.contour, data.stats); break;
          case SystemKind::kSwap: hyp = baselines::swap_words(u.contour, u.alignment, rng); break;
          case SystemKind::kReplace:
            hyp = baselines::replace_words(u.contour, u.alignment, bank, data.speaker, rng);
            break;
          case SystemKind::kModel: {
            const auto& m = *models[s];
            const auto in = data.inputs(i, m.config().use_context);
            hyp = m.generate(in, data.grid, rng, options.temperature).second;
            RngStream tf(options.seed, i);
            const auto out = m.forward(in, model::Mode::kTeacherForced, tf);
            row.nll = nll(out.post_logits, u.bins, u.contour.voiced);
            break;
          }
        }
        row.rmse = rmse(u.contour, hyp);
        row.vuv = vuv_counts(u.contour.voiced, hyp.voiced);
        if (row.rmse.warning) row.warning = "no mutually voiced frames";
        rows[i].push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }

  EvalReport report;
  report.exclusions = data.exclusions;
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) {
      report.exclusions.push_back({data.utterances[i].id, failures[i]});
      continue;
    }
    for (auto& r : rows[i]) report.rows.push_back(std::move(r));
  }
  for (const auto& spec : systems) {
    SystemAggregate agg;
    agg.system = spec.label;
    double sq = 0.0, nll_sum = 0.0;
    for (const auto& r : report.rows) {
      if (r.system != spec.label) continue;
      ++agg.utterances;
      agg.frames += r.frames;
      agg.voiced_frames += r.voiced_frames;
      agg.mutual_voiced += r.rmse.mutual_voiced;
      sq += r.rmse.sum_squares;
      agg.vuv.tp += r.vuv.tp;
      agg.vuv.fp += r.vuv.fp;
      agg.vuv.fn += r.vuv.fn;
      if (r.nll && !r.nll->warning) {
        nll_sum += r.nll->value * static_cast<double>(r.nll->frames);
        agg.nll_frames += r.nll->frames;
      }
    }
    agg.rmse_log2 = agg.mutual_voiced ? std::sqrt(sq / static_cast<double>(agg.mutual_voiced)) : 0.0;
    if (agg.nll_frames) agg.nll = nll_sum / static_cast<double>(agg.nll_frames);
    report.systems.push_back(agg);
  }

  nlohmann::json labels = nlohmann::json::array();
  for (const auto& s : systems) labels.push_back(s.label);
  nlohmann::json config = {{"seed", options.seed}, {"temperature", options.temperature}, {"systems", labels},
                           {"speaker", data.speaker}, {"utterances", manifest.entries.size()}};
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  report.provenance = {{"seed", options.seed},
                       {"temperature", options.temperature},
                       {"systems", labels},
                       {"models", model_meta},
                       {"grid", {{"mu", data.grid.mu}, {"sigma", data.grid.sigma}}},
                       {"config_hash", hash}};
  return report;
}

}  // namespace prosody::evaluation
