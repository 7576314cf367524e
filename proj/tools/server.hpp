// Copyright 2026 The dvr Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP + WebSocket front end for the render service.
//
//   GET  /volumes   catalog JSON
//   POST /render    JSON scene -> image/png
//   GET  /healthz   {"status":"ok"}
//   WS   /session   JSON edits in; JSON acks/errors and binary frames out

#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "dvr/service.hpp"

namespace dvr::server {

struct ServerOptions {
  std::string address = "127.0.0.1";
  // 0 picks a free port; see Server::port().
  unsigned short port = 8080;
  int io_threads = 2;
  SchedulerOptions scheduler;
  std::chrono::seconds idle_timeout{600};
  // Stop cleanly on SIGINT/SIGTERM.
  bool handle_signals = false;
};

class Server {
 public:
  Server(std::shared_ptr<const Catalog> catalog, ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Port actually bound.
  unsigned short port() const;

  // Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dvr::server
