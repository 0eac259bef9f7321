#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "dhm/ingest.hpp"
#include "dhm/pipeline.hpp"
#include "dhm/protocol.hpp"

namespace dhm {

struct ServiceConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path viewer_dir;  // static assets; empty serves a stub page
  LoopOptions loop;
  ReconstructionParams initial;
};

/// Reads `server.*`, `pipeline.*` and `params.*` keys.
ServiceConfig service_config_from(const KeyValueConfig& cfg);

/// HTTP + WebSocket front end around one reconstruction loop.
///   GET /info      service description (JSON)
///   GET /stream    WebSocket: JSON control messages in, binary frames out
///   GET /...       files under viewer_dir
/// All clients share the pipeline; the last set_params wins. Each client
/// holds at most one undelivered frame; newer frames replace it.
class Service {
 public:
  Service(ServiceConfig config, std::unique_ptr<FrameSource> source, ServiceInfo info);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the port and starts the network and pipeline threads. Throws
  /// std::runtime_error if the port cannot be bound.
  void start();
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  unsigned short port() const;
  std::size_t client_count() const;
  std::uint64_t frames_published() const;
  std::uint64_t frames_dropped() const;
  ParamMailbox& mailbox();

  struct Impl;  // opaque; public only so session types can name it

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace dhm
