// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "prosody/audio.hpp"
#include "prosody/codec.hpp"
#include "prosody/features.hpp"
#include "prosody/model.hpp"
#include "prosody/pitch.hpp"

namespace prosody::service {

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceConfig {
  std::filesystem::path projects_dir;
  std::filesystem::path models_dir;  // holds {model id}.ckpt
};

struct Rendition {
  std::string id;
  std::string kind;  // "generated" or "inline"
  bool has_audio = false;
  pitch::F0Contour contour;
};

/// In-memory view of a project directory.
struct Project {
  std::string id;
  std::string model_id;
  audio::AudioBuffer audio;
  features::Alignment alignment;
  features::WordEmbeddingTable embeddings;
  pitch::F0Contour analysis;
  pitch::SpeakerStats stats;
  codec::QuantGrid grid;
  features::FrameFeatures features;
  std::vector<Rendition> renditions;
  std::uint64_t next_rendition = 1;

  mutable std::shared_mutex lock;
};

/// Request handlers behind the HTTP routes. Every handler returns a response
/// instead of throwing: library errors map to 422 (bad input), 404, 409
/// (missing model checkpoint) or 500.
class Service {
 public:
  explicit Service(ServiceConfig config);

  Response create_project(const std::string& wav, const std::string& alignment,
                          const std::string& embeddings, const std::string& model_id);
  Response get_analysis(const std::string& id);
  Response generate(const std::string& id, const std::string& body);
  /// Body: {"rendition": id} or {"contour": {...}}.
  Response synthesize(const std::string& id, const std::string& body);
  /// "original" addresses the uploaded audio.
  Response get_audio(const std::string& id, const std::string& rendition, bool lowpass);
  Response list_renditions(const std::string& id);

  const ServiceConfig& config() const { return config_; }

 private:
  std::shared_ptr<Project> project(const std::string& id);
  std::shared_ptr<Project> load_project(const std::string& id);
  void persist(const Project& p) const;
  std::shared_ptr<const model::ProsodyModel> model(const std::string& id);
  pitch::F0Contour working_contour(const Project& p) const;
  pitch::F0Contour rendition_contour(const Project& p, const std::string& rendition) const;
  std::filesystem::path dir(const std::string& id) const { return config_.projects_dir / id; }

  ServiceConfig config_;
  std::mutex registry_lock_;
  std::map<std::string, std::shared_ptr<Project>> projects_;
  std::mutex models_lock_;
  std::map<std::string, std::shared_ptr<const model::ProsodyModel>> models_;
};

/// REST front end over a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prosody::service
