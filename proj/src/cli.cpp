// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/cli.hpp"

#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "prosody/audio.hpp"
#include "prosody/baselines.hpp"
#include "prosody/codec.hpp"
#include "prosody/contour_io.hpp"
#include "prosody/corpus.hpp"
#include "prosody/error.hpp"
#include "prosody/evaluation.hpp"
#include "prosody/features.hpp"
#include "prosody/model.hpp"
#include "prosody/pitch.hpp"
#include "prosody/psola.hpp"
#include "prosody/service.hpp"
#include "prosody/training.hpp"

namespace prosody::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kComponent = "cli";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_input(const std::string& path) {
  if (path == "-") {
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return bytes;
  }
  return io::read_bytes(path);
}

std::string read_input_text(const std::string& path) {
  const auto b = read_input(path);
  return {b.begin(), b.end()};
}

void write_output(const std::string& path, std::span<const std::uint8_t> bytes) {
  if (path == "-") {
    std::cout.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    std::cout.flush();
    return;
  }
  io::write_atomic(path, bytes);
}

void write_output(const std::string& path, const std::string& text) {
  write_output(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json read_json(const std::string& path, const std::string& what) { return io::parse_json(read_input_text(path), what); }

void print_diagnostic(const std::string& kind, const std::string& component, const std::string& message) {
  std::cerr << json{{"level", "error"}, {"kind", kind}, {"component", component}, {"message", message}}.dump()
            << '\n';
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kData: return "data";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kConflict: return "conflict";
    case ErrorKind::kNumerical: return "numerical";
  }
  return "error";
}

// Effective configuration: defaults, then the --config file, then flags.
struct Settings {
  int sample_rate = audio::kCanonicalRate;
  pitch::AnalysisConfig analysis;
  std::string preset = "cdar";
  json model_overrides = json::object();
  training::TrainConfig train;
  std::uint64_t seed = 0;
  double temperature = 1.0;

  void load(const json& j) {
    if (!j.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "sample_rate") {
        sample_rate = value.get<int>();
      } else if (key == "analysis") {
        for (const auto& [k, v] : value.items()) {
          if (k == "t_high") analysis.t_high = v.get<double>();
          else if (k == "t_low") analysis.t_low = v.get<double>();
          else if (k == "window_seconds") analysis.window_seconds = v.get<double>();
          else throw UsageError("unknown config key 'analysis." + k + "'");
        }
      } else if (key == "preset") {
        preset = value.get<std::string>();
      } else if (key == "model") {
        if (!value.is_object()) throw UsageError("config key 'model' must be an object");
        model_overrides = value;
      } else if (key == "train") {
        try {
          train = training::TrainConfig::from_json(value, train);
        } catch (const Error& e) {
          throw UsageError(e.what());
        }
      } else if (key == "seed") {
        seed = value.get<std::uint64_t>();
      } else if (key == "temperature") {
        temperature = value.get<double>();
      } else {
        throw UsageError("unknown config key '" + key + "'");
      }
    }
  }

  model::ModelConfig model_config(std::size_t feature_width) const {
    model::ModelConfig base;
    if (preset == "cdar") base = model::ModelConfig::cdar(feature_width);
    else if (preset == "dar") base = model::ModelConfig::dar(feature_width);
    else throw UsageError("unknown preset '" + preset + "' (expected cdar or dar)");
    try {
      auto c = model::ModelConfig::from_json(model_overrides, base);
      c.feature_width = feature_width;
      c.validate();
      return c;
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }

  json to_json() const {
    return {{"sample_rate", sample_rate},
            {"analysis",
             {{"t_high", analysis.t_high}, {"t_low", analysis.t_low}, {"window_seconds", analysis.window_seconds}}},
            {"preset", preset},
            {"model", model_overrides},
            {"train", train.to_json()},
            {"seed", seed},
            {"temperature", temperature}};
  }
};

template <typename T>
void apply(std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

model::Direction parse_direction(const std::string& s) {
  if (s == "forward") return model::Direction::kForward;
  if (s == "reverse") return model::Direction::kReverse;
  throw UsageError("direction must be forward or reverse");
}

pitch::SpeakerStats stats_or_own(const std::optional<std::string>& stats_path, const pitch::F0Contour& c) {
  if (stats_path) return io::stats_from_json(read_json(*stats_path, "stats"));
  const pitch::F0Contour one[] = {c};
  return pitch::speaker_stats(one);
}

void dry_run(const std::string& command, const Settings& s, const json& args) {
  std::cout << json{{"command", command}, {"config", s.to_json()}, {"args", args}}.dump(2) << '\n';
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Prosody analysis, generation and resynthesis", "prosody"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  bool dry = false;
  app.add_option("--config", config_path, "JSON config file (flags win)");
  app.add_flag("--dry-run", dry, "Print the effective config and exit");

  std::optional<int> f_rate;
  std::optional<double> f_t_high, f_t_low, f_temperature;
  std::optional<std::uint64_t> f_seed;
  std::string input, output = "-";

  // analyze
  auto* analyze = app.add_subcommand("analyze", "WAV to F0 contour JSON");
  std::optional<std::string> pgram_path;
  analyze->add_option("input", input, "WAV file or -")->required();
  analyze->add_option("-o,--output", output, "Contour JSON (default stdout)");
  analyze->add_option("--posteriorgram", pgram_path, "Also export the posteriorgram");
  analyze->add_option("--rate", f_rate, "Canonical sample rate");
  analyze->add_option("--t-high", f_t_high);
  analyze->add_option("--t-low", f_t_low);

  // stats
  auto* stats = app.add_subcommand("stats", "Speaker statistics over contours");
  std::vector<std::string> contour_paths;
  stats->add_option("contours", contour_paths, "Contour JSON files")->required();
  stats->add_option("-o,--output", output);

  // quantize / dequantize
  auto* quantize = app.add_subcommand("quantize", "Contour JSON to 128-class bins");
  std::optional<std::string> stats_path;
  quantize->add_option("input", input)->required();
  quantize->add_option("-o,--output", output);
  quantize->add_option("--stats", stats_path, "Speaker stats JSON (default: from the input)");
  auto* dequantize = app.add_subcommand("dequantize", "Bins back to a contour");
  dequantize->add_option("input", input)->required();
  dequantize->add_option("-o,--output", output);

  // train
  auto* train = app.add_subcommand("train", "Train a model on a corpus manifest");
  std::optional<std::string> log_path, f_preset, f_direction;
  std::optional<std::size_t> f_epochs, f_steps, f_batch, f_eval_every;
  std::optional<double> f_lr, f_clip, f_stop;
  train->add_option("manifest", input)->required();
  train->add_option("-o,--output", output, "Checkpoint path")->required();
  train->add_option("--log", log_path, "Per-epoch loss log (default <checkpoint>.log)");
  train->add_option("--preset", f_preset, "cdar or dar");
  train->add_option("--direction", f_direction, "forward or reverse");
  train->add_option("--epochs", f_epochs);
  train->add_option("--max-steps", f_steps);
  train->add_option("--batch-size", f_batch);
  train->add_option("--lr", f_lr);
  train->add_option("--clip-norm", f_clip);
  train->add_option("--stop-accuracy", f_stop);
  train->add_option("--eval-every", f_eval_every);
  train->add_option("--seed", f_seed);

  // generate
  auto* generate = app.add_subcommand("generate", "Sample a contour from a checkpoint");
  std::string model_path, alignment_path, embeddings_path, contour_path;
  std::optional<std::string> constraints_path;
  generate->add_option("--model", model_path, "Checkpoint")->required();
  generate->add_option("--alignment", alignment_path)->required();
  generate->add_option("--embeddings", embeddings_path)->required();
  generate->add_option("--contour", contour_path, "Analyzed contour (V/UV and keep regions)")->required();
  generate->add_option("--constraints", constraints_path, "Generate request JSON");
  generate->add_option("--stats", stats_path);
  generate->add_option("--seed", f_seed);
  generate->add_option("--temperature", f_temperature);
  generate->add_option("-o,--output", output);

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Baseline contour manipulations");
  std::string kind, target = "question";
  std::optional<std::string> bank_path, manifest_path, speaker;
  baseline->add_option("kind", kind, "monotone, swap, replace or repunct")->required();
  baseline->add_option("--contour", contour_path)->required();
  baseline->add_option("--alignment", alignment_path);
  baseline->add_option("--stats", stats_path);
  baseline->add_option("--bank", bank_path, "Word contour bank JSON (replace)");
  baseline->add_option("--manifest", manifest_path, "Build the bank from a corpus (replace)");
  baseline->add_option("--speaker", speaker);
  baseline->add_option("--target", target, "question or statement (repunct)");
  baseline->add_option("--seed", f_seed);
  baseline->add_option("-o,--output", output);

  // shift
  auto* shift = app.add_subcommand("shift", "Impose a contour on a WAV (PSOLA)");
  std::optional<std::string> analysis_path;
  shift->add_option("input", input)->required();
  shift->add_option("--target", contour_path, "Target contour JSON")->required();
  shift->add_option("--analysis", analysis_path, "Analysis contour (default: analyze the input)");
  shift->add_option("-o,--output", output);

  // lowpass
  auto* lowpass = app.add_subcommand("lowpass", "Low-passed listening stimulus");
  std::optional<std::string> lp_contour;
  std::optional<double> cutoff;
  lowpass->add_option("input", input)->required();
  lowpass->add_option("--contour", lp_contour, "Contour (default: analyze the input)");
  lowpass->add_option("--cutoff", cutoff, "Override the cutoff in Hz");
  lowpass->add_option("-o,--output", output);

  // eval
  auto* eval = app.add_subcommand("eval", "Objective metrics over a corpus");
  std::vector<std::string> systems;
  std::string out_dir;
  eval->add_option("manifest", input)->required();
  eval->add_option("--system", systems, "identity, monotone, swap, replace or model:<ckpt>")->required();
  eval->add_option("--out-dir", out_dir, "Directory for per_utterance.csv and aggregate.json")->required();
  eval->add_option("--seed", f_seed);
  eval->add_option("--temperature", f_temperature);

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string projects_dir = "projects", models_dir = "models", host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--projects", projects_dir);
  serve->add_option("--models", models_dir);
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_diagnostic("usage", kComponent, e.what());
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    Settings s;
    if (config_path) s.load(read_json(*config_path, "config"));
    apply(f_rate, s.sample_rate);
    apply(f_t_high, s.analysis.t_high);
    apply(f_t_low, s.analysis.t_low);
    apply(f_seed, s.seed);
    apply(f_temperature, s.temperature);
    apply(f_preset, s.preset);
    apply(f_epochs, s.train.epochs);
    apply(f_steps, s.train.max_steps);
    apply(f_batch, s.train.batch_size);
    apply(f_lr, s.train.lr);
    apply(f_clip, s.train.clip_norm);
    apply(f_stop, s.train.stop_accuracy);
    apply(f_eval_every, s.train.eval_every);
    if (f_seed) s.train.seed = *f_seed;
    if (f_direction) {
      parse_direction(*f_direction);
      s.model_overrides["direction"] = *f_direction;
    }
    if (!(s.analysis.t_low <= s.analysis.t_high)) throw UsageError("t_low must not exceed t_high");
    try {
      s.train.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }

    if (*analyze) {
      if (dry) return dry_run("analyze", s, {{"input", input}, {"output", output}}), kExitOk;
      const auto a = audio::load_audio(read_input(input), s.sample_rate);
      if (pgram_path) {
        const auto pg = pitch::candidate_posteriorgram(a, audio::FrameGrid::for_audio(a), s.analysis);
        io::write_atomic(*pgram_path, pitch::export_posteriorgram(pg));
      }
      write_output(output, io::contour_to_json(pitch::analyze(a, s.analysis), a.sample_rate).dump() + "\n");
    } else if (*stats) {
      if (dry) return dry_run("stats", s, {{"contours", contour_paths}}), kExitOk;
      std::vector<pitch::F0Contour> cs;
      for (const auto& p : contour_paths) cs.push_back(io::contour_from_json(read_json(p, "contour")));
      write_output(output, io::stats_to_json(pitch::speaker_stats(cs)).dump() + "\n");
    } else if (*quantize) {
      if (dry) return dry_run("quantize", s, {{"input", input}}), kExitOk;
      const auto c = io::contour_from_json(read_json(input, "contour"));
      const auto grid = codec::build_grid(stats_or_own(stats_path, c));
      write_output(output, io::quantized_to_json(codec::quantize(c, grid), grid).dump() + "\n");
    } else if (*dequantize) {
      if (dry) return dry_run("dequantize", s, {{"input", input}}), kExitOk;
      const auto [q, grid] = io::quantized_from_json(read_json(input, "quantized contour"));
      write_output(output, io::contour_to_json(codec::dequantize(q, grid)).dump() + "\n");
    } else if (*train) {
      const std::string log = log_path.value_or(output + ".log");
      if (dry) {
        json cfg = s.model_config(1).to_json();
        cfg.erase("feature_width");
        return dry_run("train", s, {{"manifest", input}, {"checkpoint", output}, {"log", log}, {"model", cfg}}),
               kExitOk;
      }
      const auto corpus = corpus::load_corpus(corpus::load_manifest(input), false, s.analysis);
      const auto cfg = s.model_config(corpus.utterances.front().features.matrix.cols);
      std::vector<model::UtteranceInputs> data;
      for (std::size_t i = 0; i < corpus.utterances.size(); ++i) data.push_back(corpus.inputs(i, cfg.use_context));
      model::ProsodyModel m(cfg, s.train.seed);
      std::ostringstream log_text;
      const auto summary = training::train(m, data, s.train, [&](const training::EpochReport& r) {
        json line = {{"epoch", r.epoch}, {"steps", r.steps}, {"mean_loss", r.mean_loss}};
        if (r.accuracy) line["accuracy"] = *r.accuracy;
        log_text << line.dump() << '\n';
      });
      const auto& last = summary.epochs.back();
      const json meta = {{"speaker", corpus.speaker},
                         {"stats", io::stats_to_json(corpus.stats)},
                         {"grid", {{"mu", corpus.grid.mu}, {"sigma", corpus.grid.sigma}}},
                         {"train", s.train.to_json()},
                         {"steps", summary.steps},
                         {"accuracy", last.accuracy ? json(*last.accuracy) : json(nullptr)}};
      model::save_model(output, m, meta);
      io::write_atomic(log, log_text.str());
      std::cout << json{{"checkpoint", output}, {"log", log}, {"steps", summary.steps},
                        {"epochs", summary.epochs.size()}, {"final_loss", last.mean_loss},
                        {"final_accuracy", meta.at("accuracy")}}
                       .dump()
                << '\n';
    } else if (*generate) {
      if (dry) return dry_run("generate", s, {{"model", model_path}, {"constraints", constraints_path.value_or("")}}), kExitOk;
      const auto m = model::load_model(model_path);
      const auto contour = io::contour_from_json(read_json(contour_path, "contour"));
      const auto align = features::load_alignment(alignment_path);
      const auto emb = features::load_embeddings(embeddings_path);
      const auto grid = codec::build_grid(stats_or_own(stats_path, contour));
      io::GenerateRequest req;
      if (constraints_path) req = io::generate_request_from_json(read_json(*constraints_path, "generate request"));
      if (f_seed || !constraints_path) req.seed = s.seed;
      if (f_temperature || !constraints_path) req.temperature = s.temperature;
      if (req.direction && *req.direction != m.config().direction)
        throw invalid_argument(kComponent, "checkpoint does not generate in the requested direction");
      model::UtteranceInputs in;
      in.features = features::assemble_features(align, emb, contour.voiced, audio::FrameGrid::for_frames(contour.size()))
                        .matrix;
      in.voiced = contour.voiced;
      in.constraints = io::resolve_constraints(req, contour, grid, contour.voiced);
      RngStream rng(req.seed, 0);
      const auto result = m.generate(in, grid, rng, req.temperature);
      write_output(output, io::contour_to_json(result.second).dump() + "\n");
    } else if (*baseline) {
      if (dry) return dry_run("baseline", s, {{"kind", kind}, {"contour", contour_path}}), kExitOk;
      const auto contour = io::contour_from_json(read_json(contour_path, "contour"));
      auto need_alignment = [&] {
        if (alignment_path.empty()) throw UsageError("baseline " + kind + " needs --alignment");
        return features::load_alignment(alignment_path);
      };
      RngStream rng(s.seed, 0);
      pitch::F0Contour outc;
      if (kind == "monotone") {
        outc = baselines::monotone(contour, stats_or_own(stats_path, contour));
      } else if (kind == "swap") {
        outc = baselines::swap_words(contour, need_alignment(), rng);
      } else if (kind == "replace") {
        baselines::WordContourBank bank;
        std::string who = speaker.value_or("");
        if (bank_path) {
          bank = baselines::WordContourBank::from_json(read_json(*bank_path, "bank"));
        } else if (manifest_path) {
          const auto corpus = corpus::load_corpus(corpus::load_manifest(*manifest_path), true, s.analysis);
          for (const auto& u : corpus.utterances) bank.add_utterance(corpus.speaker, u.contour, u.alignment);
          if (who.empty()) who = corpus.speaker;
        } else {
          throw UsageError("baseline replace needs --bank or --manifest");
        }
        if (who.empty() && !bank.entries.empty()) who = bank.entries.front().speaker;
        outc = baselines::replace_words(contour, need_alignment(), bank, who, rng);
      } else if (kind == "repunct") {
        baselines::Punctuation p;
        if (target == "question") p = baselines::Punctuation::kQuestion;
        else if (target == "statement") p = baselines::Punctuation::kStatement;
        else throw UsageError("--target must be question or statement");
        outc = baselines::repunctuate_heuristic(contour, need_alignment(), p, stats_or_own(stats_path, contour));
      } else {
        throw UsageError("unknown baseline '" + kind + "' (expected monotone, swap, replace or repunct)");
      }
      write_output(output, io::contour_to_json(outc).dump() + "\n");
    } else if (*shift) {
      if (dry) return dry_run("shift", s, {{"input", input}, {"target", contour_path}}), kExitOk;
      const auto a = audio::load_audio(read_input(input), s.sample_rate);
      const auto tgt = io::contour_from_json(read_json(contour_path, "target contour"));
      const auto ana =
          analysis_path ? io::contour_from_json(read_json(*analysis_path, "analysis contour")) : pitch::analyze(a, s.analysis);
      write_output(output, audio::encode_wav(psola::shift(a, ana, tgt)));
    } else if (*lowpass) {
      if (dry) return dry_run("lowpass", s, {{"input", input}}), kExitOk;
      const auto a = audio::load_audio(read_input(input), s.sample_rate);
      const auto c = lp_contour ? io::contour_from_json(read_json(*lp_contour, "contour")) : pitch::analyze(a, s.analysis);
      const double hz = cutoff ? *cutoff : evaluation::stimulus_cutoff(c);
      write_output(output, audio::encode_wav(audio::lowpass_render(a, hz)));
    } else if (*eval) {
      if (dry) return dry_run("eval", s, {{"manifest", input}, {"systems", systems}, {"out_dir", out_dir}}), kExitOk;
      std::vector<evaluation::SystemSpec> specs;
      for (const auto& sys : systems) specs.push_back(evaluation::parse_system(sys));
      const auto report = evaluation::eval_run(corpus::load_manifest(input), specs, {s.seed, s.temperature});
      fs::create_directories(out_dir);
      io::write_atomic(fs::path(out_dir) / "per_utterance.csv", report.csv());
      io::write_atomic(fs::path(out_dir) / "aggregate.json", report.aggregate_json().dump(2) + "\n");
      for (const auto& x : report.exclusions)
        std::cerr << json{{"level", "warning"}, {"component", "evaluation"}, {"excluded", x.id}, {"reason", x.reason}}.dump()
                  << '\n';
      if (report.partial()) return kExitPartial;
    } else if (*serve) {
      if (dry) return dry_run("serve", s, {{"projects", projects_dir}, {"models", models_dir}, {"host", host}, {"port", port}}), kExitOk;
      service::Service svc({projects_dir, models_dir});
      service::HttpServer server(svc);
      const int bound = server.bind(host, port);
      if (bound < 0) throw invalid_argument(kComponent, "cannot bind " + host + ":" + std::to_string(port));
      std::cerr << json{{"level", "info"}, {"listening", host + ":" + std::to_string(bound)}}.dump() << '\n';
      server.listen();
    }
    return kExitOk;
  } catch (const UsageError& e) {
    print_diagnostic("usage", kComponent, e.what());
    return kExitUsage;
  } catch (const Error& e) {
    print_diagnostic(kind_name(e.kind()), e.component(), e.what());
    return kExitData;
  } catch (const json::exception& e) {
    print_diagnostic("data", kComponent, std::string("malformed JSON: ") + e.what());
    return kExitData;
  } catch (const std::exception& e) {
    print_diagnostic("data", kComponent, e.what());
    return kExitData;
  }
}

}  // namespace prosody::cli
