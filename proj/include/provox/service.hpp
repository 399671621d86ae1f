#pragma once

// HTTP front end. Sessions live in memory; every mutating request takes the
// session's lock, and each session keeps an ordered event log that the
// /events stream replays from any offset.

#include <memory>
#include <string>

#include "provox/planner.hpp"
#include "provox/remote.hpp"
#include "provox/sim.hpp"

namespace provox {

struct ServiceConfig {
  SceneSpec scene;  // used when a create request names no scene
  BackendConfig backend;
  bool proactive = true;
  std::shared_ptr<HttpTransport> transport;  // remote backends only; null means real HTTP
};

// Maps a library error code onto an HTTP status: 404 for missing sessions
// and functions, 409 for WrongState, 400 for unreadable bodies, 502 for an
// unreachable backend, 422 otherwise.
int http_status_for(const std::string& code);

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Serves on a background thread; port 0 picks a free port. Returns the
  // bound port.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  bool run(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace provox
