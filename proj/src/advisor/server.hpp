// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "advisor/advisor.hpp"

namespace httplib {
class Server;
}

namespace unic::advisor {

class SessionStore {
 public:
  explicit SessionStore(AdvisorOptions opt) : opt_(opt) {}

  std::shared_ptr<Session> create(image::Raster world);
  /// Throws SessionError(NotFound).
  std::shared_ptr<Session> get(const std::string& id) const;
  bool erase(const std::string& id);
  size_t size() const;

 private:
  AdvisorOptions opt_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  uint64_t counter_ = 0;
};

/// HTTP/JSON session API:
///   POST   /v1/sessions                 multipart field "image"
///   POST   /v1/sessions/{id}/recommend  {"viewport": [x,y,w,h], "orientation": "landscape"|"portrait"}
///   GET    /v1/sessions/{id}
///   DELETE /v1/sessions/{id}
class AdvisorServer {
 public:
  AdvisorServer(std::shared_ptr<const model::UnicModel> model, AdvisorOptions opt = {});
  ~AdvisorServer();
  AdvisorServer(const AdvisorServer&) = delete;
  AdvisorServer& operator=(const AdvisorServer&) = delete;

  /// Serves files under `dir` at "/" (for a browser front end).
  void mount_static(const std::string& dir);
  /// Binds the socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Accept loop on a background thread.
  void start();
  void stop();
  void wait();

  SessionStore& sessions() { return store_; }

 private:
  void routes();

  std::shared_ptr<const model::UnicModel> model_;
  AdvisorOptions opt_;
  SessionStore store_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
};

}  // namespace unic::advisor
