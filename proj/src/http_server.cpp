// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#include "httplib.h"
#include "prosody/service.hpp"

namespace prosody::service {

struct HttpServer::Impl {
  explicit Impl(Service& s) : service(s) {}
  Service& service;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::string file_field(const httplib::Request& req, const std::string& key) {
  return req.has_file(key) ? req.get_file_value(key).content : std::string();
}

}  // namespace

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
  auto& s = impl_->server;
  Service& svc = impl_->service;
  s.Post("/projects", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data()) {
      reply(res, {422, "application/json",
                  R"({"error":{"component":"service_api","message":"expected multipart/form-data"}})"});
      return;
    }
    for (const char* key : {"audio", "alignment", "embeddings"}) {
      if (!req.has_file(key)) {
        reply(res, {422, "application/json",
                    std::string(R"({"error":{"component":"service_api","message":"missing part ')") + key +
                        R"('"}})"});
        return;
      }
    }
    std::string model_id = file_field(req, "model");
    if (model_id.empty()) model_id = "default";
    reply(res, svc.create_project(file_field(req, "audio"), file_field(req, "alignment"),
                                  file_field(req, "embeddings"), model_id));
  });
  s.Get(R"(/projects/([^/]+)/analysis)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.get_analysis(req.matches[1]));
  });
  s.Post(R"(/projects/([^/]+)/generate)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.generate(req.matches[1], req.body));
  });
  s.Post(R"(/projects/([^/]+)/synthesize)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.synthesize(req.matches[1], req.body));
  });
  s.Get(R"(/projects/([^/]+)/audio/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string lp = req.has_param("lowpass") ? req.get_param_value("lowpass") : "false";
    reply(res, svc.get_audio(req.matches[1], req.matches[2], lp == "true" || lp == "1"));
  });
  s.Get(R"(/projects/([^/]+)/renditions)", [&svc](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc.list_renditions(req.matches[1]));
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace prosody::service
