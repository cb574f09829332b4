#include "dass/http_server.hpp"

#include "httplib.h"

#include "dass/error.hpp"

namespace dass {

struct HttpServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {}

    void dispatch(const httplib::Request& req, httplib::Response& res) {
        ServiceRequest sr;
        sr.method = req.method;
        sr.path = req.path;
        for (const auto& [k, v] : req.params) sr.query[k] = v;
        sr.body = req.body;
        ServiceResponse out = service.handle(sr);
        res.status = out.status;
        for (const auto& [k, v] : out.headers) res.set_header(k, v);
        if (!out.content_type.empty()) res.set_content(out.body, out.content_type);
    }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) { impl_->dispatch(req, res); };
    auto& s = impl_->server;
    s.Get(".*", handler);
    s.Put(".*", handler);
    s.Post(".*", handler);
    s.Delete(".*", handler);
    s.Options(".*", handler);
    s.set_read_timeout(60, 0);
    s.set_write_timeout(60, 0);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    auto& s = impl_->server;
    if (port == 0) {
        const int bound = s.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
        return bound;
    }
    if (!s.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
    if (impl_) impl_->server.stop();
}

}  // namespace dass
