// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "scenechat/chat/service.hpp"

namespace scenechat::chat {

/// REST front end of a ChatService.
///
///   GET    /scenes                  scene summaries (?points=1 adds point clouds)
///   GET    /scenes/{id}             one summary
///   POST   /sessions                {scene_id, target_object_id, decoding?} -> session
///   GET    /sessions/{id}           session snapshot
///   POST   /sessions/{id}/messages  {text} -> {response}; ?stream=1 sends chunked text
///   DELETE /sessions/{id}
///
/// Errors are {"error": message} with 400 (bad request), 404 (unknown scene,
/// object or session), 409 (busy session), 422 (context overflow) or 500.
class HttpServer {
 public:
  explicit HttpServer(ChatService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop().
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace scenechat::chat
