// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "prosody/contour_io.hpp"
#include "prosody/evaluation.hpp"
#include "prosody/service.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace prosody;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path root;
  synth::Utterance u;
  std::string wav, alignment, embeddings;
  service::ServiceConfig config;

  Fixture() : root(fs::temp_directory_path() / "prosody_test_service"), u(synth::utterance(3)) {
    fs::remove_all(root);
    config = {root / "projects", root / "models"};
    fs::create_directories(config.models_dir);
    const auto w = audio::encode_wav(synth::vowel(u.contour));
    wav.assign(w.begin(), w.end());
    alignment = features::alignment_to_json(u.alignment);
    const auto e = features::encode_embeddings(u.embeddings);
    embeddings.assign(e.begin(), e.end());

    const auto width = synth::inputs(u, synth::grid_for({u})).features.cols;
    model::save_model(config.models_dir / "toy.ckpt", model::ProsodyModel(synth::toy_config(width), 4), {});
    auto rev = synth::toy_config(width);
    rev.direction = model::Direction::kReverse;
    model::save_model(config.models_dir / "rev.ckpt", model::ProsodyModel(rev, 4), {});
  }
  ~Fixture() { fs::remove_all(root); }

  std::string create(service::Service& s, const std::string& model = "toy") {
    const auto r = s.create_project(wav, alignment, embeddings, model);
    REQUIRE(r.status == 201);
    return json::parse(r.body).at("id").get<std::string>();
  }
};

json body(const service::Response& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("project lifecycle") {
  Fixture f;
  service::Service s(f.config);
  const auto id = f.create(s);

  const auto analysis = s.get_analysis(id);
  REQUIRE(analysis.status == 200);
  const auto doc = body(analysis);
  const auto contour = io::contour_from_json(doc.at("contour"));
  CHECK(doc.at("frames") == contour.size());
  CHECK(doc.at("words").size() == f.u.alignment.words.size());
  CHECK(doc.at("phones").size() == f.u.alignment.phones.size());
  CHECK(doc.at("model") == "toy");
  CHECK(doc.at("grid").at("hi").get<double>() > doc.at("grid").at("lo").get<double>());

  const auto gen = s.generate(id, R"({"seed": 3, "keep_regions": [[0, 20]]})");
  REQUIRE(gen.status == 201);
  const auto g = body(gen);
  CHECK(g.at("rendition") == "r1");
  const auto generated = io::contour_from_json(g.at("contour"));
  CHECK(generated.voiced == contour.voiced);
  CHECK(generated.size() == contour.size());
  for (std::size_t t = 0; t < 20; ++t)
    if (contour.voiced[t]) CHECK(1200.0 * std::abs(std::log2(generated.hz[t] / contour.hz[t])) < 100.0);

  SUBCASE("same seed gives the same rendition") {
    const auto again = body(s.generate(id, R"({"seed": 3})"));
    const auto other = body(s.generate(id, R"({"seed": 3})"));
    CHECK(again.at("bins") == other.at("bins"));
    CHECK(again.at("rendition") == "r2");
    CHECK(other.at("rendition") == "r3");
  }
  SUBCASE("synthesize and fetch audio") {
    const auto syn = s.synthesize(id, R"({"rendition": "r1"})");
    REQUIRE(syn.status == 201);
    CHECK(body(syn).at("audio") == "/projects/" + id + "/audio/r1");
    const auto wav = s.get_audio(id, "r1", false);
    REQUIRE(wav.status == 200);
    CHECK(wav.content_type == "audio/wav");
    const auto a = audio::load_audio(
        std::span(reinterpret_cast<const std::uint8_t*>(wav.body.data()), wav.body.size()));
    CHECK(a.samples.size() == audio::load_audio(std::span(reinterpret_cast<const std::uint8_t*>(f.wav.data()),
                                                          f.wav.size()))
                                  .samples.size());
    CHECK(s.get_audio(id, "r1", false).body == wav.body);

    const auto list = body(s.list_renditions(id));
    REQUIRE(list.at("renditions").size() == 1);
    CHECK(list.at("renditions")[0].at("audio") == true);
    CHECK(list.at("renditions")[0].at("kind") == "generated");
  }
  SUBCASE("inline contour") {
    auto flat = contour;
    for (std::size_t t = 0; t < flat.size(); ++t)
      if (flat.voiced[t]) flat.hz[t] = 180.0;
    const auto syn = s.synthesize(id, json{{"contour", io::contour_to_json(flat)}}.dump());
    REQUIRE(syn.status == 201);
    CHECK(body(syn).at("rendition") == "r2");
    CHECK(body(s.list_renditions(id)).at("renditions")[1].at("kind") == "inline");
  }
  SUBCASE("lowpass stimulus of the original") {
    const auto r = s.get_audio(id, "original", true);
    REQUIRE(r.status == 200);
    const auto lp = audio::load_audio(std::span(reinterpret_cast<const std::uint8_t*>(r.body.data()), r.body.size()));
    const auto orig = audio::load_audio(std::span(reinterpret_cast<const std::uint8_t*>(f.wav.data()), f.wav.size()));
    const double cutoff = evaluation::stimulus_cutoff(contour);
    const std::size_t start = 1600, len = 4096;
    REQUIRE(lp.samples.size() >= start + len);
    const double in = oracle::band_energy(orig.samples, start, len, 16000, cutoff + 20.0, 8000.0);
    const double out = oracle::band_energy(lp.samples, start, len, 16000, cutoff + 20.0, 8000.0);
    CHECK(10.0 * std::log10(in / out) >= 60.0);
  }
  SUBCASE("state survives a restart") {
    REQUIRE(s.synthesize(id, R"({"rendition": "r1"})").status == 201);
    service::Service fresh(f.config);
    CHECK(fresh.get_analysis(id).body == analysis.body);
    CHECK(fresh.list_renditions(id).body == s.list_renditions(id).body);
    CHECK(fresh.get_audio(id, "r1", false).body == s.get_audio(id, "r1", false).body);
    const auto next = body(fresh.generate(id, R"({"seed": 1})"));
    CHECK(next.at("rendition") == "r2");
  }
}

TEST_CASE("error statuses") {
  Fixture f;
  service::Service s(f.config);
  const auto id = f.create(s);
  const auto err = [](const service::Response& r) { return body(r).at("error"); };

  CHECK(s.get_analysis("nope").status == 404);
  CHECK(s.get_analysis("../etc").status == 404);
  CHECK(s.get_audio(id, "r9", false).status == 404);
  CHECK(s.synthesize(id, R"({"rendition": "r9"})").status == 404);

  REQUIRE(s.generate(id, "{}").status == 201);
  const auto unsynth = s.get_audio(id, "r1", false);
  CHECK(unsynth.status == 404);
  CHECK(err(unsynth).at("component") == "service_api");

  CHECK(s.generate(id, R"({"direction": "reverse"})").status == 409);
  const auto missing = f.create(s, "absent");
  const auto no_model = s.generate(missing, "{}");
  CHECK(no_model.status == 409);
  CHECK(err(no_model).at("message").get<std::string>().find("absent") != std::string::npos);

  const auto rev = f.create(s, "rev");
  CHECK(s.generate(rev, R"({"direction": "reverse"})").status == 201);
  CHECK(s.generate(rev, R"({"direction": "forward"})").status == 409);

  CHECK(s.generate(id, "{not json").status == 422);
  CHECK(s.generate(id, R"({"bogus": 1})").status == 422);
  CHECK(s.generate(id, R"({"keep_regions": [[5, 100000]]})").status == 422);
  CHECK(s.synthesize(id, R"({})").status == 422);
  CHECK(s.synthesize(id, R"({"rendition": "r1", "contour": {}})").status == 422);

  auto flipped = io::contour_from_json(body(s.get_analysis(id)).at("contour"));
  for (std::size_t t = 0; t < flipped.size(); ++t)
    if (!flipped.voiced[t]) {
      flipped.voiced[t] = true;
      flipped.hz[t] = 150.0;
      break;
    }
  const auto mismatch = s.synthesize(id, json{{"contour", io::contour_to_json(flipped)}}.dump());
  CHECK(mismatch.status == 422);
  CHECK(err(mismatch).at("component") == "psola_vocoder");

  CHECK(s.create_project("RIFF", f.alignment, f.embeddings, "toy").status == 422);
  CHECK(s.create_project(f.wav, "[]", f.embeddings, "toy").status == 422);
  CHECK(s.create_project(f.wav, f.alignment, f.embeddings, "../x").status == 422);
  auto short_table = f.u.embeddings;
  short_table.vectors.resize(short_table.vectors.size() - short_table.dim);
  const auto e = features::encode_embeddings(short_table);
  CHECK(s.create_project(f.wav, f.alignment, std::string(e.begin(), e.end()), "toy").status == 422);
}

TEST_CASE("http round trip") {
  Fixture f;
  service::Service s(f.config);
  service::HttpServer server(s);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });

  httplib::Client c("127.0.0.1", port);
  const httplib::MultipartFormDataItems items = {
      {"audio", f.wav, "a.wav", "audio/wav"},
      {"alignment", f.alignment, "a.json", "application/json"},
      {"embeddings", f.embeddings, "a.emb", "application/octet-stream"},
      {"model", "toy", "", "text/plain"},
  };
  const auto created = c.Post("/projects", items);
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const auto id = json::parse(created->body).at("id").get<std::string>();

  const auto analysis = c.Get("/projects/" + id + "/analysis");
  REQUIRE(analysis);
  CHECK(analysis->status == 200);
  CHECK(analysis->body == s.get_analysis(id).body);

  const auto gen = c.Post("/projects/" + id + "/generate", R"({"seed": 2})", "application/json");
  REQUIRE(gen);
  CHECK(gen->status == 201);
  const auto syn = c.Post("/projects/" + id + "/synthesize", R"({"rendition": "r1"})", "application/json");
  REQUIRE(syn);
  CHECK(syn->status == 201);
  const auto wav = c.Get("/projects/" + id + "/audio/r1?lowpass=true");
  REQUIRE(wav);
  CHECK(wav->status == 200);
  CHECK(wav->get_header_value("Content-Type") == "audio/wav");
  const auto list = c.Get("/projects/" + id + "/renditions");
  REQUIRE(list);
  CHECK(json::parse(list->body).at("renditions").size() == 1);

  const auto missing = c.Get("/projects/zzz/analysis");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  const auto not_multipart = c.Post("/projects", "{}", "application/json");
  REQUIRE(not_multipart);
  CHECK(not_multipart->status == 422);

  server.stop();
  t.join();
}
