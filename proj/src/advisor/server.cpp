// SPDX-License-Identifier: Apache-2.0
#include "advisor/server.hpp"

#include <cstdio>
#include <random>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace unic::advisor {

using nlohmann::json;

std::shared_ptr<Session> SessionStore::create(image::Raster world) {
  std::lock_guard<std::mutex> lock(mu_);
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(rng() ^ ++counter_));
  auto s = std::make_shared<Session>(buf, std::move(world), opt_);
  sessions_[s->id()] = s;
  return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw SessionError(SessionError::Code::NotFound, "unknown session " + id);
  return it->second;
}

bool SessionStore::erase(const std::string& id) {
  std::lock_guard<std::mutex> lock(mu_);
  return sessions_.erase(id) > 0;
}

size_t SessionStore::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return sessions_.size();
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& msg) { reply(res, status, {{"error", msg}}); }

int status_of(SessionError::Code c) {
  switch (c) {
    case SessionError::Code::NotFound: return 404;
    case SessionError::Code::InvalidArgument: return 400;
    case SessionError::Code::StepLimit: return 409;
  }
  return 500;
}

// Runs a handler body, mapping exceptions to error responses.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const SessionError& e) {
    fail(res, status_of(e.code()), e.what());
  } catch (const json::exception& e) {
    fail(res, 400, std::string("bad request body: ") + e.what());
  } catch (const std::invalid_argument& e) {
    fail(res, 400, e.what());
  } catch (const std::exception& e) {
    fail(res, 500, e.what());
  }
}

}  // namespace

AdvisorServer::AdvisorServer(std::shared_ptr<const model::UnicModel> model, AdvisorOptions opt)
    : model_(std::move(model)), opt_(opt), store_(opt), http_(std::make_unique<httplib::Server>()) {
  if (!model_) throw std::invalid_argument("server requires a model");
  routes();
}

AdvisorServer::~AdvisorServer() {
  stop();
  wait();
}

void AdvisorServer::routes() {
  http_->Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.has_file("image")) throw std::invalid_argument("multipart field 'image' is required");
      auto s = store_.create(image::decode_rgb(req.get_file_value("image").content));
      reply(res, 201, {{"session_id", s->id()}, {"world_w", s->world_w()}, {"world_h", s->world_h()}});
    });
  });

  http_->Post(R"(/v1/sessions/([0-9a-f]+)/recommend)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto s = store_.get(req.matches[1]);
      const json body = json::parse(req.body);
      const auto vp = body.at("viewport").get<std::array<double, 4>>();
      const geom::Orientation o = geom::parse_orientation(body.value("orientation", std::string("landscape")));
      const geom::Box viewport = geom::Box::from_array(vp);
      const Step step = s->step(*model_, viewport, o);
      json out = step.rec.to_json();
      out["step_index"] = s->trajectory().size() - 1;
      out["viewport"] = step.viewport.to_array();
      out["next_viewport"] = step.next_viewport.to_array();
      out["view_world"] = geom::from_frame(step.rec.view, viewport).to_array();
      out["crop_world"] = geom::from_frame(step.rec.crop, viewport).to_array();
      reply(res, 200, out);
    });
  });

  http_->Get(R"(/v1/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, store_.get(req.matches[1])->to_json()); });
  });

  http_->Delete(R"(/v1/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!store_.erase(req.matches[1])) throw SessionError(SessionError::Code::NotFound, "unknown session");
      res.status = 204;
    });
  });
}

void AdvisorServer::mount_static(const std::string& dir) {
  if (!http_->set_mount_point("/", dir)) throw std::invalid_argument("cannot serve directory " + dir);
}

int AdvisorServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AdvisorServer::start() {
  if (thread_.joinable()) throw std::logic_error("server already started");
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void AdvisorServer::stop() {
  if (http_) http_->stop();
}

void AdvisorServer::wait() {
  if (thread_.joinable()) thread_.join();
}

}  // namespace unic::advisor
