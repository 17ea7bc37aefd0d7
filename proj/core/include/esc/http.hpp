#pragma once

#include <memory>
#include <string>

#include "esc/gateway.hpp"

namespace esc::gateway {

/// JSON over HTTP in front of a ChatService:
///   POST /sessions                {"situation"}  -> 201 session
///   POST /sessions/{id}/messages  {"text"}       -> 200 ChatResponse
///   GET  /sessions/{id}                          -> 200 session
///   GET  /healthz                                -> 200 {"status", "model_loaded"}
/// Errors are {"error": message} with 400, 404, 503 or 500.
class HttpServer {
public:
    explicit HttpServer(ChatService& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace esc::gateway
