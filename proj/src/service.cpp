// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "prosody/service.hpp"

#include <random>
#include <span>

#include "prosody/contour_io.hpp"
#include "prosody/error.hpp"
#include "prosody/evaluation.hpp"
#include "prosody/psola.hpp"
#include "prosody/rng.hpp"

namespace prosody::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kComponent = "service_api";

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

Response json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

Response error_response(int status, const std::string& component, const std::string& message) {
  return json_response(status, {{"error", {{"component", component}, {"message", message}}}});
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kData: return 422;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kNumerical: return 500;
  }
  return 500;
}

template <typename F>
Response guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    std::string msg = e.what();
    const std::string prefix = e.component() + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    return error_response(status_for(e.kind()), e.component(), msg);
  } catch (const json::exception& e) {
    return error_response(422, kComponent, std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, kComponent, e.what());
  }
}

Error not_found(const std::string& msg) { return Error(ErrorKind::kNotFound, kComponent, msg); }

bool valid_token(const std::string& s) {
  if (s.empty() || s.size() > 64) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  return true;
}

std::string new_token() {
  static std::mutex m;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lk(m);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

json analysis_document(const Project& p) {
  const auto fg = audio::FrameGrid::for_audio(p.audio);
  json words = json::array();
  for (const auto& w : p.alignment.words) {
    const auto [a, b] = features::word_frames(w, fg);
    words.push_back({{"text", w.text}, {"start_frame", a}, {"end_frame", b}});
  }
  json phones = json::array();
  const auto inv = features::phoneme_inventory();
  for (const auto& ph : p.alignment.phones) {
    const auto [a, b] = features::word_frames(features::Word{"", ph.start, ph.end, {}}, fg);
    json e = {{"symbol", std::string(inv[ph.symbol])}, {"start_frame", a}, {"end_frame", b}};
    e["word"] = ph.word ? json(*ph.word) : json(nullptr);
    phones.push_back(e);
  }
  return {{"id", p.id},
          {"model", p.model_id},
          {"frames", p.analysis.size()},
          {"contour", io::contour_to_json(p.analysis, p.audio.sample_rate)},
          {"words", words},
          {"phones", phones},
          {"stats", io::stats_to_json(p.stats)},
          {"grid", {{"mu", p.grid.mu}, {"sigma", p.grid.sigma}, {"lo", p.grid.lo()}, {"hi", p.grid.hi()}}}};
}

void check_vuv(const pitch::F0Contour& target, const pitch::F0Contour& analysis) {
  if (target.size() != analysis.size())
    throw data_error("psola_vocoder", "contour has " + std::to_string(target.size()) + " frames, project has " +
                                          std::to_string(analysis.size()));
  for (std::size_t t = 0; t < target.size(); ++t)
    if (target.voiced[t] != analysis.voiced[t])
      throw data_error("psola_vocoder", "V/UV mismatch at frame " + std::to_string(t));
}

}  // namespace

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  fs::create_directories(config_.projects_dir);
}

void Service::persist(const Project& p) const {
  json renditions = json::array();
  for (const auto& r : p.renditions)
    renditions.push_back({{"id", r.id}, {"kind", r.kind}, {"audio", r.has_audio}});
  const json manifest = {{"format", 1},
                         {"id", p.id},
                         {"model", p.model_id},
                         {"analysis", io::contour_to_json(p.analysis, p.audio.sample_rate)},
                         {"stats", io::stats_to_json(p.stats)},
                         {"grid", {{"mu", p.grid.mu}, {"sigma", p.grid.sigma}}},
                         {"renditions", renditions},
                         {"next_rendition", p.next_rendition}};
  io::write_atomic(dir(p.id) / "manifest.json", manifest.dump(2));
}

std::shared_ptr<Project> Service::load_project(const std::string& id) {
  const fs::path d = dir(id);
  if (!fs::exists(d / "manifest.json")) return nullptr;
  auto p = std::make_shared<Project>();
  const json m = io::parse_json(io::read_text(d / "manifest.json"), "project manifest");
  p->id = m.at("id").get<std::string>();
  p->model_id = m.at("model").get<std::string>();
  p->audio = audio::load_audio(d / "audio.wav");
  p->alignment = features::load_alignment(d / "alignment.json", p->audio.duration());
  p->embeddings = features::load_embeddings(d / "embeddings.bin");
  p->analysis = io::contour_from_json(m.at("analysis"));
  p->stats = io::stats_from_json(m.at("stats"));
  p->grid = {m.at("grid").at("mu").get<double>(), m.at("grid").at("sigma").get<double>()};
  p->features = features::assemble_features(p->alignment, p->embeddings, p->analysis.voiced,
                                            audio::FrameGrid::for_audio(p->audio));
  p->next_rendition = m.at("next_rendition").get<std::uint64_t>();
  for (const auto& r : m.at("renditions")) {
    Rendition rd;
    rd.id = r.at("id").get<std::string>();
    rd.kind = r.at("kind").get<std::string>();
    rd.has_audio = r.at("audio").get<bool>();
    const json doc = io::parse_json(io::read_text(d / "renditions" / (rd.id + ".json")), "rendition");
    rd.contour = io::contour_from_json(doc.at("contour"));
    p->renditions.push_back(std::move(rd));
  }
  return p;
}

std::shared_ptr<Project> Service::project(const std::string& id) {
  if (!valid_token(id)) throw not_found("unknown project '" + id + "'");
  std::lock_guard lk(registry_lock_);
  if (auto it = projects_.find(id); it != projects_.end()) return it->second;
  auto p = load_project(id);
  if (!p) throw not_found("unknown project '" + id + "'");
  projects_[id] = p;
  return p;
}

std::shared_ptr<const model::ProsodyModel> Service::model(const std::string& id) {
  std::lock_guard lk(models_lock_);
  if (auto it = models_.find(id); it != models_.end()) return it->second;
  const fs::path path = config_.models_dir / (id + ".ckpt");
  if (!valid_token(id) || !fs::exists(path))
    throw Error(ErrorKind::kConflict, kComponent, "model checkpoint '" + id + "' is not available");
  auto m = std::make_shared<const model::ProsodyModel>(model::load_model(path));
  models_[id] = m;
  return m;
}

pitch::F0Contour Service::working_contour(const Project& p) const {
  return p.renditions.empty() ? p.analysis : p.renditions.back().contour;
}

pitch::F0Contour Service::rendition_contour(const Project& p, const std::string& rendition) const {
  if (rendition == "original") return p.analysis;
  for (const auto& r : p.renditions)
    if (r.id == rendition) return r.contour;
  throw not_found("unknown rendition '" + rendition + "'");
}

Response Service::create_project(const std::string& wav, const std::string& alignment,
                                 const std::string& embeddings, const std::string& model_id) {
  return guarded([&] {
    if (!valid_token(model_id)) throw invalid_argument(kComponent, "model id must be a nonempty token");
    auto p = std::make_shared<Project>();
    p->model_id = model_id;
    p->audio = audio::load_audio(as_bytes(wav));
    p->alignment = features::parse_alignment(alignment, p->audio.duration());
    p->embeddings = features::parse_embeddings(as_bytes(embeddings));
    if (p->embeddings.word_count() != p->alignment.words.size())
      throw data_error("features", "embedding table has " + std::to_string(p->embeddings.word_count()) +
                                       " rows for " + std::to_string(p->alignment.words.size()) + " words");
    p->analysis = pitch::analyze(p->audio);
    const pitch::F0Contour one[] = {p->analysis};
    p->stats = pitch::speaker_stats(one);
    p->grid = codec::build_grid(p->stats);
    p->features = features::assemble_features(p->alignment, p->embeddings, p->analysis.voiced,
                                              audio::FrameGrid::for_audio(p->audio));

    std::string id;
    do id = new_token();
    while (fs::exists(dir(id)));
    p->id = id;
    const fs::path d = dir(id);
    fs::create_directories(d / "renditions");
    io::write_atomic(d / "audio.wav", audio::encode_wav(p->audio));
    io::write_atomic(d / "alignment.json", features::alignment_to_json(p->alignment));
    io::write_atomic(d / "embeddings.bin", features::encode_embeddings(p->embeddings));
    persist(*p);
    {
      std::lock_guard lk(registry_lock_);
      projects_[id] = p;
    }
    return json_response(201, {{"id", id}, {"frames", p->analysis.size()}});
  });
}

Response Service::get_analysis(const std::string& id) {
  return guarded([&] {
    auto p = project(id);
    std::shared_lock lk(p->lock);
    return json_response(200, analysis_document(*p));
  });
}

Response Service::generate(const std::string& id, const std::string& body) {
  return guarded([&] {
    auto p = project(id);
    const auto req = io::generate_request_from_json(io::parse_json(body, "generate request"));
    std::unique_lock lk(p->lock);
    const auto m = model(p->model_id);
    if (req.direction && *req.direction != m->config().direction)
      throw Error(ErrorKind::kConflict, kComponent,
                  "model '" + p->model_id + "' does not generate in the requested direction");
    if (m->config().feature_width != p->features.matrix.cols)
      throw data_error(kComponent, "model '" + p->model_id + "' expects " +
                                       std::to_string(m->config().feature_width) + " features, project has " +
                                       std::to_string(p->features.matrix.cols));
    model::UtteranceInputs in;
    in.features = p->features.matrix;
    in.voiced = p->analysis.voiced;
    in.constraints = io::resolve_constraints(req, working_contour(*p), p->grid, p->analysis.voiced);
    RngStream rng(req.seed, 0);
    auto [out, contour] = m->generate(in, p->grid, rng, req.temperature);

    Rendition r;
    r.id = "r" + std::to_string(p->next_rendition);
    r.kind = "generated";
    r.contour = contour;
    const json doc = {{"id", r.id},
                      {"kind", r.kind},
                      {"request", io::generate_request_to_json(req)},
                      {"bins", out.sampled_bins},
                      {"contour", io::contour_to_json(contour, p->audio.sample_rate)}};
    io::write_atomic(dir(p->id) / "renditions" / (r.id + ".json"), doc.dump());
    p->renditions.push_back(std::move(r));
    ++p->next_rendition;
    persist(*p);
    return json_response(201, {{"rendition", doc.at("id")}, {"bins", doc.at("bins")}, {"contour", doc.at("contour")}});
  });
}

Response Service::synthesize(const std::string& id, const std::string& body) {
  return guarded([&] {
    auto p = project(id);
    const json j = io::parse_json(body, "synthesize request");
    if (!j.is_object() || (j.contains("rendition") == j.contains("contour")) || j.size() != 1)
      throw invalid_argument(kComponent, "synthesize needs exactly one of \"rendition\" or \"contour\"");
    std::unique_lock lk(p->lock);
    Rendition* target = nullptr;
    if (j.contains("rendition")) {
      const auto rid = j.at("rendition").get<std::string>();
      for (auto& r : p->renditions)
        if (r.id == rid) target = &r;
      if (!target) throw not_found("unknown rendition '" + rid + "'");
      check_vuv(target->contour, p->analysis);
    } else {
      const auto contour = io::contour_from_json(j.at("contour"));
      check_vuv(contour, p->analysis);
      Rendition r;
      r.id = "r" + std::to_string(p->next_rendition);
      r.kind = "inline";
      r.contour = contour;
      const json doc = {{"id", r.id}, {"kind", r.kind}, {"contour", io::contour_to_json(contour, p->audio.sample_rate)}};
      io::write_atomic(dir(p->id) / "renditions" / (r.id + ".json"), doc.dump());
      p->renditions.push_back(std::move(r));
      ++p->next_rendition;
      target = &p->renditions.back();
    }
    const auto shifted = psola::shift(p->audio, p->analysis, target->contour);
    io::write_atomic(dir(p->id) / "renditions" / (target->id + ".wav"), audio::encode_wav(shifted));
    target->has_audio = true;
    persist(*p);
    return json_response(201, {{"rendition", target->id}, {"audio", "/projects/" + p->id + "/audio/" + target->id}});
  });
}

Response Service::get_audio(const std::string& id, const std::string& rendition, bool lowpass) {
  return guarded([&] {
    auto p = project(id);
    std::shared_lock lk(p->lock);
    audio::AudioBuffer a;
    if (rendition == "original") {
      a = p->audio;
    } else {
      const Rendition* r = nullptr;
      for (const auto& x : p->renditions)
        if (x.id == rendition) r = &x;
      if (!r) throw not_found("unknown rendition '" + rendition + "'");
      if (!r->has_audio) throw not_found("rendition '" + rendition + "' has not been synthesized");
      if (!lowpass) {
        const auto bytes = io::read_bytes(dir(p->id) / "renditions" / (rendition + ".wav"));
        return Response{200, "audio/wav", std::string(bytes.begin(), bytes.end())};
      }
      a = audio::load_audio(dir(p->id) / "renditions" / (rendition + ".wav"));
    }
    if (lowpass) a = evaluation::make_lowpass_stimulus(a, rendition_contour(*p, rendition));
    const auto bytes = audio::encode_wav(a);
    return Response{200, "audio/wav", std::string(bytes.begin(), bytes.end())};
  });
}

Response Service::list_renditions(const std::string& id) {
  return guarded([&] {
    auto p = project(id);
    std::shared_lock lk(p->lock);
    json list = json::array();
    for (const auto& r : p->renditions) list.push_back({{"id", r.id}, {"kind", r.kind}, {"audio", r.has_audio}});
    return json_response(200, {{"project", p->id}, {"renditions", list}});
  });
}

}  // namespace prosody::service
