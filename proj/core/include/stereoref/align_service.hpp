#pragma once

#include <memory>
#include <string>

#include "stereoref/reference.hpp"
#include "stereoref/se3.hpp"

namespace stereoref {

class SessionStore;

struct ServiceConfig {
  // Relative scene paths in requests resolve against this directory, and
  // committed poses are written below <data_dir>/sessions/<id>/.
  std::string data_dir = ".";
  double dz_bound = kDefaultDzBound;
  ReferenceConfig reference;
};

// HTTP front end of the alignment sessions.
//
//   POST /sessions                    create, 201 {session} | 422
//   GET  /sessions/{id}               {session} | 404
//   POST /sessions/{id}/delta         {"rx","ry","rz","dz"} -> {session} | 409 | 404
//   GET  /sessions/{id}/render        ?eye=left|right|pair&mode=solid|wireframe|points&alpha=&swap= -> PNG
//   POST /sessions/{id}/commit        {"operator"} -> 201 {commit}
//   GET  /sessions/{id}/commits       {"commits": [...]}
//   GET  /sessions/{id}/preview       range statistics and mask percentages
//   GET  /healthz                     {"status": "ok", "version": ...}
//
// Errors are JSON objects {"error": message}.
class AlignService {
 public:
  explicit AlignService(ServiceConfig config);
  ~AlignService();
  AlignService(const AlignService&) = delete;
  AlignService& operator=(const AlignService&) = delete;

  // Binds host:port (port 0 picks a free port) and returns the bound port.
  // Throws Error when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Serves until stop() is called. Requires a successful bind().
  void run();
  void stop();
  // Blocks until run() is accepting connections.
  void wait_until_ready() const;

  SessionStore& sessions();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stereoref
