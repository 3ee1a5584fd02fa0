#pragma once

#include <memory>
#include <string>

#include "monilog/service.hpp"

namespace monilog {

/// JSON-over-HTTP front end of a Service. Status codes: 400 validation
/// error, 404 unknown entity, 413 oversized batch, 500 I/O or internal.
/// Error bodies are {"error": message}.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port, or -1.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after a successful bind.
    bool serve();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace monilog
