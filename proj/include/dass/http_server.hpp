#pragma once

#include <memory>
#include <string>

#include "dass/service.hpp"

namespace dass {

/// Adapts a Service to HTTP. One instance serves until stop() is called.
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();

    /// Binds; port 0 picks a free port. Throws IoError when binding fails.
    int bind(const std::string& host, int port);
    /// Blocks until stop().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dass
