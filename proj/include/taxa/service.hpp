#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace taxa {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds any free port
  std::filesystem::path data_dir = "taxa-data";
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> embeddings;
  std::optional<std::filesystem::path> captions;
  std::optional<std::filesystem::path> probabilities;
  std::optional<std::filesystem::path> static_dir;
  std::string cors_origin;
  int worker_threads = 8;
};

/// HTTP/JSON facade over coder sessions, comparison, clustering assistance
/// and prediction.
///
/// Mutations on one session are serialized and checked against the
/// caller's expected version; every accepted mutation is persisted to
/// `<data_dir>/<session_id>.json` before it is acknowledged. Sessions found
/// in the data directory are loaded on construction.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Bind the listening socket and return the port.
  int bind();
  /// Serve until stop() is called. bind() must have succeeded.
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace taxa
